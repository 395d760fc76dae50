#include "plansel/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "plansel/common.hpp"

namespace plansel {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'S', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedParam>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(params.size()));
    for (const NamedParam& p : params) {
        write_pod(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        write_pod(out, static_cast<std::uint32_t>(2));
        write_pod(out, static_cast<std::uint64_t>(p.tensor.rows()));
        write_pod(out, static_cast<std::uint64_t>(p.tensor.cols()));
        for (std::size_t i = 0; i < p.tensor.size(); ++i)
            write_pod(out, static_cast<float>(p.tensor.data()[i]));
    }
    if (!out) throw Error("checkpoint: write failed for " + path.string());
}

std::vector<NamedParam> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("checkpoint: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw Error("checkpoint: bad magic in " + path.string());
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw Error("checkpoint: unsupported version " + std::to_string(version));
    const auto count = read_pod<std::uint32_t>(in, "parameter count");
    std::vector<NamedParam> params;
    params.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw Error("checkpoint: truncated parameter name");
        const auto rank = read_pod<std::uint32_t>(in, "rank");
        if (rank != 2) throw Error("checkpoint: unsupported rank " + std::to_string(rank));
        const auto rows = read_pod<std::uint64_t>(in, "rows");
        const auto cols = read_pod<std::uint64_t>(in, "cols");
        ad::Tensor t(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), true);
        for (std::size_t j = 0; j < t.size(); ++j)
            t.data()[j] = static_cast<double>(read_pod<float>(in, "payload"));
        params.push_back({std::move(name), std::move(t)});
    }
    return params;
}

}  // namespace plansel
