#include "spectlv/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace spectlv {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'S', 'P', 'L', 'V', 'C', 'K', 'P', 'T'};
}

void save_checkpoint(const std::vector<Tensor<float>*>& tensors,
                     const std::filesystem::path& path) {
    json header = json::array();
    for (const auto* t : tensors) {
        if (t->name.empty()) throw std::runtime_error("checkpoint: unnamed tensor");
        header.push_back({{"name", t->name}, {"shape", t->shape}});
    }
    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out.good()) throw std::runtime_error("checkpoint: cannot write " + path.string());
    out.write(kMagic, 8);
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(hs.data(), hlen);
    for (const auto* t : tensors)
        out.write(reinterpret_cast<const char*>(t->v.data()),
                  static_cast<std::streamsize>(t->v.size() * sizeof(float)));
    if (!out.good()) throw std::runtime_error("checkpoint: short write to " + path.string());
}

void load_checkpoint(const std::vector<Tensor<float>*>& tensors,
                     const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in.good() || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (!in.good()) throw std::runtime_error("checkpoint: truncated header");
    json header = json::parse(hs);
    if (header.size() != tensors.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        Tensor<float>& t = *tensors[i];
        if (header[i].at("name").get<std::string>() != t.name)
            throw std::runtime_error("checkpoint: expected tensor " + t.name + ", file has " +
                                     header[i].at("name").get<std::string>());
        if (header[i].at("shape").get<TensorShape>() != t.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + t.name);
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(float)));
        if (!in.good()) throw std::runtime_error("checkpoint: truncated payload at " + t.name);
    }
}

}  // namespace spectlv
