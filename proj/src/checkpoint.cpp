#include "sketchloom/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sketchloom/image.hpp"

using nlohmann::json;

namespace sketchloom::nn {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'L', 'M'};
constexpr uint32_t kVersion = 1;

template <typename U>
void put_le(std::vector<uint8_t>& out, U v) {
    for (size_t i = 0; i < sizeof(U); ++i) out.push_back(uint8_t(v >> (8 * i)));
}

template <typename U>
U get_le(const uint8_t* p) {
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i) v |= U(p[i]) << (8 * i);
    return v;
}

size_t element_count(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return n;
}

}  // namespace

const NamedTensor* TensorFile::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensor& TensorFile::need(const std::string& name) const {
    const NamedTensor* t = find(name);
    if (!t) throw FormatError("checkpoint is missing tensor '" + name + "'");
    return *t;
}

void save_tensor_file(const std::string& path, const TensorFile& tf) {
    json meta = tf.metadata;
    json dir = json::array();
    uint64_t offset = 0;
    for (const auto& t : tf.tensors) {
        require(element_count(t.shape) == t.data.size(),
                "save_tensor_file: shape of '" + t.name + "' disagrees with data size");
        dir.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
        offset += uint64_t(t.data.size()) * sizeof(float);
    }
    meta["tensors"] = std::move(dir);
    const std::string meta_str = meta.dump();

    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_le<uint32_t>(out, kVersion);
    put_le<uint64_t>(out, uint64_t(meta_str.size()));
    out.insert(out.end(), meta_str.begin(), meta_str.end());
    const size_t payload_at = out.size();
    out.resize(payload_at + offset);
    uint8_t* p = out.data() + payload_at;
    for (const auto& t : tf.tensors) {
        std::memcpy(p, t.data.data(), t.data.size() * sizeof(float));
        p += t.data.size() * sizeof(float);
    }
    write_file(path, out);
}

TensorFile load_tensor_file(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError(path + ": not a checkpoint file (bad magic)");
    const uint32_t version = get_le<uint32_t>(&bytes[4]);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint format version " +
                          std::to_string(version));
    const uint64_t meta_len = get_le<uint64_t>(&bytes[8]);
    if (16 + meta_len > bytes.size())
        throw FormatError(path + ": truncated checkpoint metadata");
    json meta;
    try {
        meta = json::parse(bytes.begin() + 16, bytes.begin() + 16 + meta_len);
    } catch (const json::exception& e) {
        throw FormatError(path + ": checkpoint metadata is not valid JSON: " + e.what());
    }

    TensorFile tf;
    const size_t payload_at = 16 + size_t(meta_len);
    const size_t payload_size = bytes.size() - payload_at;
    try {
        for (const auto& d : meta.at("tensors")) {
            NamedTensor t;
            t.name = d.at("name").get<std::string>();
            t.shape = d.at("shape").get<std::vector<int>>();
            const uint64_t offset = d.at("offset").get<uint64_t>();
            const size_t count = element_count(t.shape);
            if (offset + count * sizeof(float) > payload_size)
                throw FormatError(path + ": tensor '" + t.name +
                                  "' extends past the end of the payload");
            t.data.resize(count);
            std::memcpy(t.data.data(), bytes.data() + payload_at + offset,
                        count * sizeof(float));
            tf.tensors.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw FormatError(path + ": checkpoint tensor directory is malformed: " + e.what());
    }
    meta.erase("tensors");
    tf.metadata = std::move(meta);
    return tf;
}

json spec_to_json(const NetworkSpec& spec) {
    return {{"kind", spec.kind},
            {"in_channels", spec.in_channels},
            {"out_channels", spec.out_channels},
            {"base_width", spec.base_width},
            {"depth", spec.depth},
            {"dropout_p", spec.dropout_p},
            {"spectral_norm", spec.spectral_norm}};
}

NetworkSpec spec_from_json(const json& j) {
    try {
        NetworkSpec s;
        s.kind = j.at("kind").get<std::string>();
        s.in_channels = j.at("in_channels").get<int>();
        s.out_channels = j.at("out_channels").get<int>();
        s.base_width = j.at("base_width").get<int>();
        s.depth = j.at("depth").get<int>();
        s.dropout_p = j.at("dropout_p").get<double>();
        s.spectral_norm = j.at("spectral_norm").get<bool>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed network spec: ") + e.what());
    }
}

}  // namespace sketchloom::nn
