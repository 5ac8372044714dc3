#include "pgat/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace pgat {

namespace {

constexpr char kMagic[4] = {'P', 'G', 'A', 'T'};

class Fnv1a {
public:
    void update(const void* data, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= bytes[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

void write_bytes(std::ofstream& out, Fnv1a& sum, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    sum.update(data, n);
}

template <typename T>
void write_value(std::ofstream& out, Fnv1a& sum, T v) {
    write_bytes(out, sum, &v, sizeof(v));
}

template <typename T>
T read_value(std::ifstream& in, Fnv1a& sum, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError("checkpoint '" + path + "' is truncated");
    sum.update(&v, sizeof(v));
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const ModelParams& model, double created_unix_s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");

    Fnv1a sum;
    write_bytes(out, sum, kMagic, sizeof(kMagic));
    write_value(out, sum, kCheckpointVersion);
    write_value(out, sum, static_cast<std::uint32_t>(model.dims.embed_dim));
    write_value(out, sum, static_cast<std::uint32_t>(model.dims.layers));
    write_value(out, sum, static_cast<std::uint32_t>(model.dims.heads));
    write_value(out, sum, created_unix_s);

    auto& mutable_model = const_cast<ModelParams&>(model); // serialized read-only
    for (const TensorRef& r : mutable_model.tensor_refs()) {
        write_bytes(out, sum, r.data, r.size * sizeof(double));
    }
    const std::uint64_t checksum = sum.value();
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");

    Fnv1a sum;
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError("checkpoint '" + path + "' has a bad magic string");
    }
    sum.update(magic, sizeof(magic));

    const auto version = read_value<std::uint32_t>(in, sum, path);
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint '" + path + "' has unsupported version " +
                      std::to_string(version));
    }
    ModelDims dims;
    dims.embed_dim = static_cast<int>(read_value<std::uint32_t>(in, sum, path));
    dims.layers = static_cast<int>(read_value<std::uint32_t>(in, sum, path));
    dims.heads = static_cast<int>(read_value<std::uint32_t>(in, sum, path));
    (void)read_value<double>(in, sum, path); // created_unix_s, informational

    ModelParams model = ModelParams::create(dims);
    for (TensorRef& r : model.tensor_refs()) {
        in.read(reinterpret_cast<char*>(r.data),
                static_cast<std::streamsize>(r.size * sizeof(double)));
        if (!in) throw IoError("checkpoint '" + path + "' is truncated in tensor " + r.name);
        sum.update(r.data, r.size * sizeof(double));
    }
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in) throw IoError("checkpoint '" + path + "' is missing its checksum");
    if (stored != sum.value()) {
        throw IoError("checkpoint '" + path + "' is corrupt (checksum mismatch)");
    }
    return model;
}

void write_manifest(const std::string& path, const ModelParams& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << "format_version " << kCheckpointVersion << "\n";
    out << "embed_dim " << model.dims.embed_dim << "\n";
    out << "layers " << model.dims.layers << "\n";
    out << "heads " << model.dims.heads << "\n";
    auto& mutable_model = const_cast<ModelParams&>(model);
    for (const TensorRef& r : mutable_model.tensor_refs()) {
        out << r.name;
        for (int d : r.shape) out << " " << d;
        out << "\n";
    }
    if (!out) throw IoError("failed writing manifest '" + path + "'");
}

} // namespace pgat
