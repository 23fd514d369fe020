#include <zlib.h>

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "wseg/image.hpp"

namespace wseg {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

[[noreturn]] void fail_format(const std::string& what, std::size_t offset) {
    throw FormatError(what + " (at byte offset " + std::to_string(offset) + ")");
}

// ------------------------------------------------------------------ PNG

constexpr std::uint8_t kPngSig[8] = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a};

std::uint32_t be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void push_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                const std::vector<std::uint8_t>& payload) {
    push_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + payload.size()));
    push_be32(out, crc);
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw IoError("zlib compression failed");
    }
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& compressed,
                                       std::size_t expected_size, std::size_t offset_for_error) {
    std::vector<std::uint8_t> out(expected_size);
    uLongf size = static_cast<uLongf>(expected_size);
    const int rc = uncompress(out.data(), &size, compressed.data(),
                              static_cast<uLong>(compressed.size()));
    if (rc != Z_OK || size != expected_size) {
        fail_format("PNG image data is corrupt or truncated", offset_for_error);
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const std::uint8_t* pixels, int width, int height,
                                     int channels) {
    const std::size_t row = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw;
    raw.reserve((row + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        raw.insert(raw.end(), pixels + y * row, pixels + (y + 1) * row);
    }

    std::vector<std::uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<std::uint8_t> ihdr;
    push_be32(ihdr, static_cast<std::uint32_t>(width));
    push_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(channels == 3 ? 2 : 0);              // color type: RGB or gray
    ihdr.push_back(0);                                  // compression
    ihdr.push_back(0);                                  // filter method
    ihdr.push_back(0);                                  // no interlace
    push_chunk(out, "IHDR", ihdr);
    push_chunk(out, "IDAT", zlib_deflate(raw));
    push_chunk(out, "IEND", {});
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// Decodes an 8-bit gray or RGB non-interlaced PNG into a packed pixel buffer.
std::vector<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, int& width,
                                     int& height, int& channels) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0) {
        fail_format("not a PNG file", 0);
    }
    std::size_t at = 8;
    bool have_header = false;
    std::vector<std::uint8_t> idat;
    bool done = false;
    while (!done) {
        if (at + 8 > bytes.size()) fail_format("truncated PNG chunk header", at);
        const std::uint32_t len = be32(&bytes[at]);
        if (at + 12 + len > bytes.size()) fail_format("truncated PNG chunk", at);
        const char* type = reinterpret_cast<const char*>(&bytes[at + 4]);
        const std::uint8_t* payload = &bytes[at + 8];
        const std::uint32_t stored_crc = be32(&bytes[at + 8 + len]);
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, &bytes[at + 4], 4 + len);
        if (crc != stored_crc) fail_format("PNG chunk CRC mismatch", at);

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) fail_format("bad IHDR length", at);
            width = static_cast<int>(be32(payload));
            height = static_cast<int>(be32(payload + 4));
            const int bit_depth = payload[8];
            const int color_type = payload[9];
            const int interlace = payload[12];
            if (width <= 0 || height <= 0) fail_format("bad PNG dimensions", at);
            if (bit_depth != 8) fail_format("unsupported PNG bit depth", at);
            if (color_type == 0) {
                channels = 1;
            } else if (color_type == 2) {
                channels = 3;
            } else {
                fail_format("unsupported PNG color type " + std::to_string(color_type), at);
            }
            if (interlace != 0) fail_format("interlaced PNG not supported", at);
            have_header = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!have_header) fail_format("IDAT before IHDR", at);
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            done = true;
        }
        at += 12 + len;
        if (!done && at >= bytes.size()) fail_format("PNG missing IEND", at);
    }
    if (!have_header || idat.empty()) fail_format("PNG has no image data", at);

    const std::size_t row = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw = zlib_inflate(idat, (row + 1) * height, at);

    std::vector<std::uint8_t> pixels(row * height);
    std::vector<std::uint8_t> prev(row, 0);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (row + 1)];
        const std::uint8_t* src = &raw[y * (row + 1) + 1];
        std::uint8_t* dst = &pixels[y * row];
        for (std::size_t i = 0; i < row; ++i) {
            const int a = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: fail_format("bad PNG filter type " + std::to_string(filter), at);
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xff);
        }
        std::memcpy(prev.data(), dst, row);
    }
    return pixels;
}

// ------------------------------------------------------------------ PPM / PGM

// Reads one whitespace-delimited token, skipping '#' comments.
std::size_t next_token(const std::vector<std::uint8_t>& bytes, std::size_t at, std::string& tok) {
    while (at < bytes.size()) {
        const char c = static_cast<char>(bytes[at]);
        if (c == '#') {
            while (at < bytes.size() && bytes[at] != '\n') ++at;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++at;
        } else {
            break;
        }
    }
    tok.clear();
    while (at < bytes.size()) {
        const char c = static_cast<char>(bytes[at]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++at;
    }
    return at;
}

std::vector<std::uint8_t> decode_pnm(const std::vector<std::uint8_t>& bytes, int& width,
                                     int& height, int& channels) {
    std::string tok;
    std::size_t at = next_token(bytes, 0, tok);
    if (tok == "P6") {
        channels = 3;
    } else if (tok == "P5") {
        channels = 1;
    } else {
        fail_format("unsupported image format", 0);
    }
    std::string w_tok, h_tok, max_tok;
    at = next_token(bytes, at, w_tok);
    at = next_token(bytes, at, h_tok);
    at = next_token(bytes, at, max_tok);
    try {
        width = std::stoi(w_tok);
        height = std::stoi(h_tok);
    } catch (...) {
        fail_format("bad PNM header", at);
    }
    if (width <= 0 || height <= 0) fail_format("bad PNM dimensions", at);
    if (max_tok != "255") fail_format("unsupported PNM max value '" + max_tok + "'", at);
    if (at >= bytes.size()) fail_format("truncated PNM header", at);
    ++at;  // single whitespace byte after maxval
    const std::size_t need = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() - at < need) fail_format("truncated PNM pixel data", bytes.size());
    return std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(at + need));
}

std::vector<std::uint8_t> encode_pnm(const std::uint8_t* pixels, int width, int height,
                                     int channels) {
    std::string header = std::string(channels == 3 ? "P6" : "P5") + "\n" +
                         std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), pixels, pixels + static_cast<std::size_t>(width) * height * channels);
    return out;
}

bool is_png_path(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext != ".ppm" && ext != ".pgm";  // default to PNG
}

std::vector<std::uint8_t> decode_any(const std::vector<std::uint8_t>& bytes, int& width,
                                     int& height, int& channels) {
    if (bytes.empty()) fail_format("empty image file", 0);
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) {
        return decode_png(bytes, width, height, channels);
    }
    return decode_pnm(bytes, width, height, channels);
}

}  // namespace

ImageRGB decode_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    int w = 0, h = 0, ch = 0;
    auto pixels = decode_any(bytes, w, h, ch);
    ImageRGB img(w, h);
    if (ch == 3) {
        img.pixels = std::move(pixels);
    } else {
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            img.pixels[i * 3] = img.pixels[i * 3 + 1] = img.pixels[i * 3 + 2] = pixels[i];
        }
    }
    return img;
}

GrayImage decode_gray(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    int w = 0, h = 0, ch = 0;
    auto pixels = decode_any(bytes, w, h, ch);
    GrayImage img(w, h);
    if (ch == 1) {
        img.pixels = std::move(pixels);
    } else {
        // Rec.601 integer luma
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const int r = pixels[i * 3], g = pixels[i * 3 + 1], b = pixels[i * 3 + 2];
            img.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
        }
    }
    return img;
}

void encode_image(const ImageRGB& image, const std::filesystem::path& path) {
    if (is_png_path(path)) {
        write_file(path, encode_png(image.pixels.data(), image.width, image.height, 3));
    } else {
        write_file(path, encode_pnm(image.pixels.data(), image.width, image.height, 3));
    }
}

void encode_gray(const GrayImage& image, const std::filesystem::path& path) {
    if (is_png_path(path)) {
        write_file(path, encode_png(image.pixels.data(), image.width, image.height, 1));
    } else {
        write_file(path, encode_pnm(image.pixels.data(), image.width, image.height, 1));
    }
}

std::vector<std::uint8_t> encode_png_rgb(const ImageRGB& image) {
    return encode_png(image.pixels.data(), image.width, image.height, 3);
}

std::vector<std::uint8_t> encode_png_gray(const GrayImage& image) {
    return encode_png(image.pixels.data(), image.width, image.height, 1);
}

GrayImage gray_from_mask(const BinaryMask& mask) {
    GrayImage g(mask.width, mask.height);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) g.pixels[i] = mask.pixels[i] ? 255 : 0;
    return g;
}

GrayImage gray_from_rgb(const ImageRGB& image) {
    GrayImage g(image.width, image.height);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
        const int r = image.pixels[i * 3], gg = image.pixels[i * 3 + 1],
                  b = image.pixels[i * 3 + 2];
        g.pixels[i] = static_cast<std::uint8_t>((299 * r + 587 * gg + 114 * b + 500) / 1000);
    }
    return g;
}

}  // namespace wseg
