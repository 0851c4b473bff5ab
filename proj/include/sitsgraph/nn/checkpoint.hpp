#pragma once

#include "sitsgraph/datacube.hpp"
#include "sitsgraph/nn/layers.hpp"

#include <json.hpp>

#include <map>

namespace sitsgraph::nn {

// File layout: uint64 little-endian header length, the JSON header, then the
// float32 blob of every tensor listed in header["tensors"] in that order.
struct Checkpoint {
    nlohmann::json header = nlohmann::json::object();
    std::vector<std::string> order;
    std::map<std::string, Mat<float>> tensors;

    template <class T>
    void put(const std::string& name, const Mat<T>& m) {
        order.push_back(name);
        tensors[name] = m.template cast<float>();
    }
    // Copies a stored tensor into `dst`, checking the shape.
    template <class T>
    void get(const std::string& name, Mat<T>& dst) const;
};

template <class T>
void store_model(Checkpoint& ck, const ParamList<T>& params, const BufferList<T>& buffers);
template <class T>
void load_model(const Checkpoint& ck, const ParamList<T>& params, const BufferList<T>& buffers);

void save_checkpoint(const Checkpoint& ck, const fs::path& file);
Checkpoint load_checkpoint(const fs::path& file);

}  // namespace sitsgraph::nn
