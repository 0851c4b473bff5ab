#include "sitsgraph/nn/checkpoint.hpp"

#include "sitsgraph/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>

namespace sitsgraph::nn {

using nlohmann::json;

namespace {

template <class V>
V to_le(V v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto raw = std::bit_cast<std::array<char, sizeof(V)>>(v);
        std::reverse(raw.begin(), raw.end());
        return std::bit_cast<V>(raw);
    } else {
        return v;
    }
}

}  // namespace

template <class T>
void Checkpoint::get(const std::string& name, Mat<T>& dst) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(Errc::ConfigMismatch, "checkpoint lacks tensor " + name);
    if (dst.size() != 0 && (dst.rows() != it->second.rows() || dst.cols() != it->second.cols())) {
        throw Error(Errc::ConfigMismatch, "checkpoint tensor " + name + " has shape " +
                                              std::to_string(it->second.rows()) + "x" +
                                              std::to_string(it->second.cols()) + ", model expects " +
                                              std::to_string(dst.rows()) + "x" + std::to_string(dst.cols()));
    }
    dst = it->second.template cast<T>();
}

template <class T>
void store_model(Checkpoint& ck, const ParamList<T>& params, const BufferList<T>& buffers) {
    for (const auto& [name, p] : params) ck.put(name, p->value);
    for (const auto& [name, b] : buffers) ck.put(name, *b);
}

template <class T>
void load_model(const Checkpoint& ck, const ParamList<T>& params, const BufferList<T>& buffers) {
    for (const auto& [name, p] : params) ck.get(name, p->value);
    for (const auto& [name, b] : buffers) ck.get(name, *b);
}

void save_checkpoint(const Checkpoint& ck, const fs::path& file) {
    json header = ck.header;
    json list = json::array();
    for (const auto& name : ck.order) {
        const auto& m = ck.tensors.at(name);
        list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    }
    header["tensors"] = list;
    const std::string text = header.dump();
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::MissingFile, "cannot write checkpoint " + file.string());
    const std::uint64_t len = to_le<std::uint64_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& name : ck.order) {
        const auto& m = ck.tensors.at(name);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const float v = to_le(m.data()[i]);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
}

Checkpoint load_checkpoint(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::MissingFile, "cannot read checkpoint " + file.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    len = to_le(len);
    if (!in || len > (1u << 30)) throw Error(Errc::ParseError, "corrupt checkpoint header in " + file.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    Checkpoint ck;
    try {
        ck.header = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::ParseError, "checkpoint header: " + std::string(e.what()));
    }
    for (const auto& t : ck.header.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        Mat<float> m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            float v = 0;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            m.data()[i] = to_le(v);
        }
        if (!in) throw Error(Errc::ParseError, "checkpoint truncated at tensor " + name);
        ck.order.push_back(name);
        ck.tensors[name] = std::move(m);
    }
    ck.header.erase("tensors");
    return ck;
}

template void Checkpoint::get<float>(const std::string&, Mat<float>&) const;
template void Checkpoint::get<double>(const std::string&, Mat<double>&) const;
template void store_model<float>(Checkpoint&, const ParamList<float>&, const BufferList<float>&);
template void store_model<double>(Checkpoint&, const ParamList<double>&, const BufferList<double>&);
template void load_model<float>(const Checkpoint&, const ParamList<float>&, const BufferList<float>&);
template void load_model<double>(const Checkpoint&, const ParamList<double>&, const BufferList<double>&);

}  // namespace sitsgraph::nn
