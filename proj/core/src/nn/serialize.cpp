#include "beesense/nn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "beesense/error.hpp"

namespace beesense::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

constexpr char kMagic[8] = {'B', 'S', 'M', 'O', 'D', 'E', 'L', '\0'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

    template <typename T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }

    const std::uint8_t* take(std::size_t n) {
        if (n > bytes_.size() - pos_) {
            fail(ErrorKind::Format, "model file is truncated");
        }
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(NetworkGraph& graph) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put<std::uint32_t>(out, kModelFormatVersion);
    const std::string topo = graph.topology();
    put<std::uint64_t>(out, topo.size());
    out.insert(out.end(), topo.begin(), topo.end());
    const auto params = graph.parameters();
    put<std::uint64_t>(out, params.size());
    for (const auto& np : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(np.name.size()));
        out.insert(out.end(), np.name.begin(), np.name.end());
        const Tensor& v = np.parameter->value;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v.rank()));
        for (auto d : v.shape()) {
            put<std::uint64_t>(out, d);
        }
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        out.insert(out.end(), p, p + v.size() * sizeof(double));
    }
    return out;
}

NetworkGraph decode_model(const std::vector<std::uint8_t>& bytes) {
    Reader in(bytes);
    if (bytes.size() < sizeof kMagic || std::memcmp(in.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
        fail(ErrorKind::Format, "not a model file");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != kModelFormatVersion) {
        fail(ErrorKind::Version, "model file version " + std::to_string(version) + ", this build reads " +
                                     std::to_string(kModelFormatVersion));
    }
    const auto topo_len = in.get<std::uint64_t>();
    const auto* topo = in.take(topo_len);
    NetworkGraph graph = NetworkGraph::from_topology(std::string(reinterpret_cast<const char*>(topo), topo_len));

    std::map<std::string, Parameter*> by_name;
    for (auto& np : graph.parameters()) {
        by_name[np.name] = np.parameter;
    }
    const auto count = in.get<std::uint64_t>();
    if (count != by_name.size()) {
        fail(ErrorKind::Format, "model file holds " + std::to_string(count) + " parameters, topology needs " +
                                    std::to_string(by_name.size()));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto name_len = in.get<std::uint32_t>();
        const auto* name_bytes = in.take(name_len);
        const std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            fail(ErrorKind::Format, "model file has unknown parameter '" + name + "'");
        }
        const auto rank = in.get<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) {
            d = in.get<std::uint64_t>();
        }
        Tensor& value = it->second->value;
        if (shape != value.shape()) {
            fail(ErrorKind::Format, "parameter '" + name + "' stored as " + shape_string(shape) + ", expected " +
                                        shape_string(value.shape()));
        }
        std::memcpy(value.data(), in.take(value.size() * sizeof(double)), value.size() * sizeof(double));
        by_name.erase(it);
    }
    if (!in.done()) {
        fail(ErrorKind::Format, "trailing bytes after model parameters");
    }
    return graph;
}

void save_model(NetworkGraph& graph, const std::filesystem::path& path) {
    const auto bytes = encode_model(graph);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorKind::Io, "failed writing " + path.string());
    }
}

NetworkGraph load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot read " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace beesense::nn
