#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>

#include "feddr/bytes.hpp"
#include "feddr/dataset.hpp"
#include "feddr/image_ops.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// External dataset format: a directory of binary P6 PPM images (8-bit) plus a
// labels.csv manifest with header `filename,label`. The alternative raw
// tensor format is `FIMG` | u32-LE height | width | channels | f32-LE pixels.
// ---------------------------------------------------------------------------

inline void write_ppm(const std::string& path, const Tensor<float>& pixels) {
    const std::int64_t h = pixels.dim(0), w = pixels.dim(1);
    if (pixels.dim(2) != 3) throw ShapeError("write_ppm expects [H,W,3]");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (std::int64_t i = 0; i < h; ++i) {
        for (std::int64_t j = 0; j < w * 3; ++j)
            row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(
                std::lround(clamp01(pixels[i * w * 3 + j]) * 255.0));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("short write: " + path);
}

inline Tensor<float> read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch;
        while ((ch = in.get()) != EOF) {
            if (ch == '#') {  // comment to end of line
                while ((ch = in.get()) != EOF && ch != '\n') {}
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        return tok;
    };

    if (next_token() != "P6") throw IoError("unparsable PPM header (not P6): " + path);
    const std::string ws = next_token(), hs = next_token(), ms = next_token();
    std::int64_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoll(ws);
        h = std::stoll(hs);
        maxval = std::stoll(ms);
    } catch (...) {
        throw IoError("unparsable PPM header dimensions: " + path);
    }
    if (w <= 0 || h <= 0) throw IoError("invalid PPM dimensions: " + path);
    if (maxval != 255) throw IoError("unsupported PPM maxval (expected 255): " + path);

    std::vector<unsigned char> raw(static_cast<std::size_t>(h * w * 3));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError("truncated PPM pixel data: " + path);

    Tensor<float> out({h, w, 3});
    for (std::int64_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<float>(raw[static_cast<std::size_t>(i)]) / 255.0f;
    return out;
}

constexpr char kFimgMagic[4] = {'F', 'I', 'M', 'G'};

inline void write_fimg(const std::string& path, const Tensor<float>& pixels) {
    if (pixels.rank() != 3) throw ShapeError("write_fimg expects [H,W,C]");
    ByteWriter w;
    w.raw(kFimgMagic, 4);
    w.u32(static_cast<std::uint32_t>(pixels.dim(0)));
    w.u32(static_cast<std::uint32_t>(pixels.dim(1)));
    w.u32(static_cast<std::uint32_t>(pixels.dim(2)));
    w.raw(pixels.data(), sizeof(float) * static_cast<std::size_t>(pixels.size()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.size()));
}

inline Tensor<float> read_fimg(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    ByteReader r(bytes);
    try {
        char magic[4];
        r.raw(magic, 4, "FIMG magic");
        if (std::memcmp(magic, kFimgMagic, 4) != 0) throw IoError("bad FIMG magic: " + path);
        const std::int64_t h = r.u32("height"), w = r.u32("width"), c = r.u32("channels");
        if (h == 0 || w == 0 || c == 0) throw IoError("invalid FIMG dimensions: " + path);
        Tensor<float> out({h, w, c});
        r.raw(out.data(), sizeof(float) * static_cast<std::size_t>(out.size()), "pixels");
        r.expect_done("FIMG");
        return out;
    } catch (const DecodeError& e) {
        throw IoError("invalid FIMG file " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Ingestion: resizes every manifest image to the configured square input size
// and scales values into [0,1]. Errors name the offending manifest row.
// ---------------------------------------------------------------------------

inline Dataset ingest(const std::string& dir_path, const std::string& labels_file,
                      std::int64_t input_size) {
    std::ifstream manifest(labels_file);
    if (!manifest) throw IoError("cannot open manifest: " + labels_file);

    Dataset out;
    out.name = std::filesystem::path(dir_path).filename().string();
    out.provenance = Provenance::ingested;

    std::string line;
    int row = 0;
    bool header_seen = false;
    while (std::getline(manifest, line)) {
        ++row;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line != "filename,label")
                throw IoError(labels_file + " row 1: expected header 'filename,label'");
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw IoError(labels_file + " row " + std::to_string(row) + ": missing comma");
        const std::string filename = line.substr(0, comma);
        const std::string label_str = line.substr(comma + 1);
        int label = -1;
        try {
            std::size_t used = 0;
            label = std::stoi(label_str, &used);
            if (used != label_str.size()) label = -1;
        } catch (...) {
            label = -1;
        }
        if (label < 0 || label >= kNumClasses)
            throw IoError(labels_file + " row " + std::to_string(row) + ": label '" +
                          label_str + "' outside 0.." + std::to_string(kNumClasses - 1));

        const std::string path = (std::filesystem::path(dir_path) / filename).string();
        Tensor<float> pixels;
        try {
            if (filename.size() >= 5 && filename.substr(filename.size() - 5) == ".fimg")
                pixels = read_fimg(path);
            else
                pixels = read_ppm(path);
        } catch (const IoError& e) {
            throw IoError(labels_file + " row " + std::to_string(row) + ": " + e.what());
        }
        if (pixels.dim(2) != 3)
            throw IoError(labels_file + " row " + std::to_string(row) +
                          ": expected 3 channels");
        out.items.push_back({bilinear_resize(pixels, input_size, input_size), label});
    }
    if (out.items.empty()) throw UsageError("ingest: manifest lists no images: " + labels_file);
    return out;
}

// Writes a dataset in the external format (images/imgNNNNN.ppm + labels.csv).
inline void write_dataset(const Dataset& dataset, const std::string& dir_path) {
    namespace fs = std::filesystem;
    const fs::path dir(dir_path);
    std::error_code ec;
    fs::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create dataset directory: " + dir_path);

    std::ofstream manifest(dir / "labels.csv", std::ios::trunc);
    if (!manifest) throw IoError("cannot write manifest in: " + dir_path);
    manifest << "filename,label\n";
    for (std::size_t i = 0; i < dataset.items.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img%05zu.ppm", i);
        write_ppm((dir / "images" / name).string(), dataset.items[i].pixels);
        manifest << name << "," << dataset.items[i].label << "\n";
    }
    if (!manifest) throw IoError("short manifest write in: " + dir_path);
}

inline Dataset read_dataset(const std::string& dir_path, std::int64_t input_size) {
    return ingest((std::filesystem::path(dir_path) / "images").string(),
                  (std::filesystem::path(dir_path) / "labels.csv").string(), input_size);
}

}  // namespace feddr
