#include "odm/tensor_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace odm {

namespace {

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_myt(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("MYT1", 4);
    const unsigned char rank = static_cast<unsigned char>(t.rank());
    os.write(reinterpret_cast<const char*>(&rank), 1);
    for (int d : t.shape) put_u32_le(os, static_cast<std::uint32_t>(d));
    static_assert(sizeof(float) == 4);
    // f32 little-endian payload; this build targets little-endian hosts.
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * 4));
    if (!os) throw std::runtime_error("short write: " + path);
}

Tensor read_myt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MYT1", 4) != 0)
        throw std::runtime_error("bad MYT1 magic in " + path);
    unsigned char rank = 0;
    is.read(reinterpret_cast<char*>(&rank), 1);
    if (!is || rank < 1) throw std::runtime_error("bad MYT1 rank in " + path);
    std::vector<int> shape(rank);
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = get_u32_le(is);
        if (!is || d < 1) throw std::runtime_error("bad MYT1 dim in " + path);
        shape[static_cast<std::size_t>(i)] = static_cast<int>(d);
    }
    std::vector<float> data(static_cast<std::size_t>(shape_numel(shape)));
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 4));
    if (!is) throw std::runtime_error("truncated MYT1 payload in " + path);
    return Tensor(std::move(shape), std::move(data));
}

Tensor read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    auto next_token = [&is, &path]() -> std::string {
        std::string tok;
        while (true) {
            int c = is.get();
            if (c == EOF) throw std::runtime_error("truncated PPM header in " + path);
            if (c == '#') {
                while (c != EOF && c != '\n') c = is.get();
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
    };
    if (next_token() != "P6") throw std::runtime_error("not a binary P6 PPM: " + path);
    const int W = std::stoi(next_token());
    const int H = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (W < 1 || H < 1) throw std::runtime_error("bad PPM dimensions in " + path);
    if (maxval != 255) throw std::runtime_error("only 8-bit PPM supported: " + path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(3) * W * H);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("truncated PPM payload in " + path);
    Tensor img({3, H, W});
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < 3; ++c)
                img.at(c, h, w) = static_cast<float>(raw[(static_cast<std::size_t>(h) * W + w) * 3 + c]) / 255.0f;
    return img;
}

void write_ppm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("write_ppm expects a 3×H×W tensor, got " + img.shape_str());
    const int H = img.dim(1), W = img.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "P6\n" << W << " " << H << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(3) * W * H);
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(img.at(c, h, w), 0.0f, 1.0f);
                raw[(static_cast<std::size_t>(h) * W + w) * 3 + c] =
                    static_cast<unsigned char>(v * 255.0f + 0.5f);
            }
    os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace odm
