#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "sketchloom/nn/network.hpp"

namespace sketchloom::nn {

// Named-tensor container, also the checkpoint format:
//   "SKLM" | u32 format version | u64 metadata length | metadata JSON | payload
// Integers are little-endian; payloads are consecutive float32 runs in
// directory order. The metadata JSON carries a "tensors" directory with
// name, shape, and byte offset per tensor, plus whatever the writer adds.
struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct TensorFile {
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
    // Like find, but a missing name is a format error.
    const NamedTensor& need(const std::string& name) const;
};

void save_tensor_file(const std::string& path, const TensorFile& tf);
TensorFile load_tensor_file(const std::string& path);

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

// Bulk copy between a network's parameter/state lists and named tensors.
template <typename T>
void append_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                    std::vector<ParamRef<T>> refs) {
    for (auto& r : refs) {
        NamedTensor t;
        t.name = prefix + r.name;
        t.shape = r.shape;
        t.data.assign(r.value->begin(), r.value->end());
        out.push_back(std::move(t));
    }
}

template <typename T>
void restore_tensors(const TensorFile& tf, const std::string& prefix,
                     std::vector<ParamRef<T>> refs) {
    for (auto& r : refs) {
        const NamedTensor& t = tf.need(prefix + r.name);
        if (t.data.size() != r.value->size())
            throw FormatError("checkpoint tensor " + t.name + " has " +
                              std::to_string(t.data.size()) + " values, expected " +
                              std::to_string(r.value->size()));
        std::copy(t.data.begin(), t.data.end(), r.value->begin());
    }
}

}  // namespace sketchloom::nn
