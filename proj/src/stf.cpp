#include "scfm/stf.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "scfm/errors.hpp"

namespace scfm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "STF I/O assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'T', 'F', '1'};
constexpr std::uint8_t kDtypeF64 = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in)
        throw FormatError("stf: truncated header");
    return v;
}

} // namespace

void stf_write(const std::filesystem::path& path, const Tensor& t) {
    for (double v : t.values())
        if (!std::isfinite(v))
            throw DomainError("stf_write: non-finite tensor entry");

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("stf_write: cannot open " + tmp.string());
        out.write(kMagic, 4);
        put(out, kDtypeF64);
        put(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape())
            put(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(t.values().data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!out)
            throw IoError("stf_write: write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("stf_write: rename failed: " + ec.message());
}

Tensor stf_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("stf_read: cannot open " + path.string());

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("stf_read: bad magic in " + path.string());
    const auto dtype = get<std::uint8_t>(in);
    if (dtype != kDtypeF64)
        throw FormatError("stf_read: unsupported dtype code " + std::to_string(dtype));
    const auto rank = get<std::uint32_t>(in);
    if (rank > 32)
        throw FormatError("stf_read: implausible rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
        d = static_cast<std::size_t>(get<std::uint64_t>(in));
        numel *= d;
    }
    std::vector<double> data(numel);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != numel * sizeof(double))
        throw FormatError("stf_read: payload shorter than dims imply");
    in.peek();
    if (!in.eof())
        throw FormatError("stf_read: trailing bytes after payload");
    return Tensor(std::move(shape), std::move(data));
}

} // namespace scfm
