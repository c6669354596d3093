#include "feddr/common.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

namespace feddr {

Sha256 sha256(const void* data, std::size_t len) {
    Sha256 out{};
    unsigned int out_len = 0;
    EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr);
    return out;
}

Sha256 sha256(const std::vector<std::uint8_t>& bytes) {
    return sha256(bytes.data(), bytes.size());
}

Sha256 sha256(std::string_view text) {
    return sha256(text.data(), text.size());
}

std::string to_hex(const Sha256& digest) {
    static const char* hexdig = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(hexdig[b >> 4]);
        s.push_back(hexdig[b & 0xf]);
    }
    return s;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
    return to_hex(sha256(bytes));
}

std::string sha256_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for hashing: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

}  // namespace feddr
