#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "feddr/bytes.hpp"
#include "feddr/model.hpp"

namespace feddr {

// ---------------------------------------------------------------------------
// Checkpoint file format (all integers little-endian):
//   magic "FDCK" | u16 version=1 | u32 round | 32-byte config hash |
//   u32 tensor count | per tensor:
//     u16 name length | UTF-8 name | u8 dtype (0=f32, 1=f64) | u8 ndim |
//     ndim x u32 dims | raw little-endian element data
// The same per-tensor encoding carries ParameterSets on the wire.
// ---------------------------------------------------------------------------

constexpr char kCheckpointMagic[4] = {'F', 'D', 'C', 'K'};
constexpr std::uint16_t kCheckpointVersion = 1;

template <class Scalar>
constexpr std::uint8_t dtype_code();
template <>
constexpr std::uint8_t dtype_code<float>() { return 0; }
template <>
constexpr std::uint8_t dtype_code<double>() { return 1; }

template <class Scalar>
void encode_tensor(ByteWriter& w, const std::string& name, const Tensor<Scalar>& t) {
    if (name.size() > 0xffff) throw ConfigError("tensor name too long: " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
    w.u8(dtype_code<Scalar>());
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i)
        w.u32(static_cast<std::uint32_t>(t.dim(i)));
    w.raw(t.data(), sizeof(Scalar) * static_cast<std::size_t>(t.size()));
}

template <class Scalar>
NamedTensor<Scalar> decode_tensor(ByteReader& r) {
    const std::uint16_t name_len = r.u16("tensor name length");
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len, "tensor name");
    const std::uint8_t dtype = r.u8("tensor dtype");
    if (dtype != dtype_code<Scalar>())
        throw DecodeError("tensor dtype " + std::to_string(dtype) + " does not match " +
                              (dtype_code<Scalar>() == 0 ? "f32" : "f64") + " decode",
                          r.offset() - 1);
    const std::uint8_t ndim = r.u8("tensor ndim");
    if (ndim == 0) throw DecodeError("tensor with zero dimensions", r.offset() - 1);
    std::vector<std::int64_t> shape(ndim);
    std::int64_t count = 1;
    for (std::uint8_t i = 0; i < ndim; ++i) {
        const std::uint32_t d = r.u32("tensor dim");
        if (d == 0) throw DecodeError("tensor dimension is zero", r.offset() - 4);
        shape[i] = d;
        count *= d;
        if (count > (std::int64_t(1) << 32))
            throw DecodeError("tensor too large", r.offset());
    }
    Tensor<Scalar> t(shape);
    r.raw(t.data(), sizeof(Scalar) * static_cast<std::size_t>(count), "tensor data");
    return {std::move(name), std::move(t)};
}

template <class Scalar>
void encode_parameter_set(ByteWriter& w, const ParameterSet<Scalar>& pset) {
    w.u32(static_cast<std::uint32_t>(pset.size()));
    for (const auto& item : pset)
        encode_tensor(w, item.name, item.tensor);
}

template <class Scalar>
ParameterSet<Scalar> decode_parameter_set(ByteReader& r) {
    const std::uint32_t count = r.u32("tensor count");
    ParameterSet<Scalar> pset;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto item = decode_tensor<Scalar>(r);
        pset.add(std::move(item.name), std::move(item.tensor));
    }
    return pset;
}

template <class Scalar>
std::vector<std::uint8_t> parameter_set_bytes(const ParameterSet<Scalar>& pset) {
    ByteWriter w;
    encode_parameter_set(w, pset);
    return w.bytes();
}

template <class Scalar>
std::string parameter_set_checksum(const ParameterSet<Scalar>& pset) {
    return sha256_hex(parameter_set_bytes(pset));
}

// Canonical architecture description hashed into checkpoints so a checkpoint
// can only be loaded back into the architecture that produced it.
inline std::string architecture_string(const std::vector<LayerSpec>& specs,
                                       std::array<std::int64_t, 3> input_hwc) {
    std::string s = "input:" + std::to_string(input_hwc[0]) + "x" +
                    std::to_string(input_hwc[1]) + "x" + std::to_string(input_hwc[2]);
    for (const auto& spec : specs) {
        s += ";" + std::string(layer_kind_name(spec.kind));
        if (spec.units > 0) s += ":" + std::to_string(spec.units);
        if (spec.kind == LayerKind::dropout) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), ":%.6f", spec.rate);
            s += buf;
        }
    }
    return s;
}

template <class Scalar>
Sha256 config_hash(const Model<Scalar>& model) {
    return sha256(architecture_string(model.specs, model.input_hwc));
}

// serialized checkpoint byte length of the model (header + full state)
template <class Scalar>
std::int64_t model_size_bytes(const Model<Scalar>& model) {
    std::int64_t n = 4 + 2 + 4 + 32 + 4;  // magic, version, round, hash, tensor count
    for (const auto& item : model.full_state()) {
        n += 2 + static_cast<std::int64_t>(item.name.size()) + 1 + 1 +
             4 * item.tensor.rank() +
             static_cast<std::int64_t>(sizeof(Scalar)) * item.tensor.size();
    }
    return n;
}

template <class Scalar>
std::vector<std::uint8_t> checkpoint_bytes(const Model<Scalar>& model, std::uint32_t round) {
    ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u16(kCheckpointVersion);
    w.u32(round);
    const Sha256 hash = config_hash(model);
    w.raw(hash.data(), hash.size());
    encode_parameter_set(w, model.full_state());
    return w.bytes();
}

template <class Scalar>
void save_checkpoint(const Model<Scalar>& model, std::uint32_t round,
                     const std::string& path) {
    const auto bytes = checkpoint_bytes(model, round);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to checkpoint: " + path);
}

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class Scalar>
struct RawCheckpoint {
    std::uint32_t round = 0;
    Sha256 config_hash{};
    ParameterSet<Scalar> state;
};

template <class Scalar>
RawCheckpoint<Scalar> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    try {
        char magic[4];
        r.raw(magic, 4, "magic");
        if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
            throw DecodeError("bad checkpoint magic", 0);
        const std::uint16_t version = r.u16("version");
        if (version != kCheckpointVersion)
            throw DecodeError("unsupported checkpoint version " + std::to_string(version), 4);
        RawCheckpoint<Scalar> ck;
        ck.round = r.u32("round");
        r.raw(ck.config_hash.data(), ck.config_hash.size(), "config hash");
        ck.state = decode_parameter_set<Scalar>(r);
        r.expect_done("checkpoint");
        return ck;
    } catch (const DecodeError& e) {
        throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
    }
}

template <class Scalar>
RawCheckpoint<Scalar> load_checkpoint_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_checkpoint<Scalar>(bytes);
}

// Loads a checkpoint into a model skeleton built from `specs`; the stored
// config hash must match the architecture.
template <class Scalar>
std::pair<Model<Scalar>, std::uint32_t> load_checkpoint(
    const std::string& path, const std::vector<LayerSpec>& specs,
    std::array<std::int64_t, 3> input_hwc = {64, 64, 3}) {
    RawCheckpoint<Scalar> raw = load_checkpoint_raw<Scalar>(path);
    Model<Scalar> model = build_model<Scalar>(specs, 0, input_hwc);
    if (raw.config_hash != config_hash(model))
        throw CheckpointError("checkpoint architecture hash does not match: " + path);
    model.load_full_state(raw.state);
    return {std::move(model), raw.round};
}

}  // namespace feddr
