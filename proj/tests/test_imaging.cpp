#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <zlib.h>

#include <cstring>
#include <fstream>

#include "wseg/imaging.hpp"
#include "wseg/rng.hpp"

using namespace wseg;

namespace {

std::filesystem::path tmp_dir() {
    static const auto dir = [] {
        auto d = std::filesystem::temp_directory_path() / "wseg_imaging_tests";
        std::filesystem::create_directories(d);
        return d;
    }();
    return dir;
}

ImageRGB random_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    ImageRGB img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    return img;
}

BinaryMask random_mask(int w, int h, std::uint64_t seed, double density = 0.3) {
    Rng rng(seed);
    BinaryMask m(w, h);
    for (auto& p : m.pixels) p = rng.bernoulli(density) ? 1 : 0;
    return m;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(p, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// Minimal PNG writer that lets the test pick the per-row filter type, so the
// decoder's unfilter paths get exercised beyond what our encoder emits.
std::vector<std::uint8_t> png_with_filter(const ImageRGB& img, std::uint8_t filter) {
    const int ch = 3;
    const std::size_t row = static_cast<std::size_t>(img.width) * ch;
    std::vector<std::uint8_t> raw;
    std::vector<std::uint8_t> prev(row, 0);
    auto paeth = [](int a, int b, int c) {
        const int p = a + b - c;
        const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
        if (pa <= pb && pa <= pc) return a;
        if (pb <= pc) return b;
        return c;
    };
    for (int y = 0; y < img.height; ++y) {
        raw.push_back(filter);
        const std::uint8_t* src = img.pixels.data() + y * row;
        for (std::size_t i = 0; i < row; ++i) {
            const int a = i >= static_cast<std::size_t>(ch) ? src[i - ch] : 0;
            const int b = prev[i];
            const int c = i >= static_cast<std::size_t>(ch) ? prev[i - ch] : 0;
            int v = src[i];
            switch (filter) {
                case 1: v -= a; break;
                case 2: v -= b; break;
                case 3: v -= (a + b) / 2; break;
                case 4: v -= paeth(a, b, c); break;
                default: break;
            }
            raw.push_back(static_cast<std::uint8_t>(v & 0xff));
        }
        std::memcpy(prev.data(), src, row);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    REQUIRE(compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                      6) == Z_OK);
    compressed.resize(bound);

    std::vector<std::uint8_t> out = {0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a};
    auto be32 = [&](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>(v >> 24));
        out.push_back(static_cast<std::uint8_t>(v >> 16));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v));
    };
    auto chunk = [&](const char type[4], const std::vector<std::uint8_t>& payload) {
        be32(static_cast<std::uint32_t>(payload.size()));
        const std::size_t at = out.size();
        out.insert(out.end(), type, type + 4);
        out.insert(out.end(), payload.begin(), payload.end());
        std::uint32_t crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, out.data() + at, static_cast<uInt>(4 + payload.size()));
        be32(crc);
    };
    std::vector<std::uint8_t> ihdr;
    {
        std::vector<std::uint8_t> tmp;
        std::swap(out, tmp);
        be32(static_cast<std::uint32_t>(img.width));
        be32(static_cast<std::uint32_t>(img.height));
        ihdr = out;
        std::swap(out, tmp);
    }
    ihdr.push_back(8);
    ihdr.push_back(2);
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk("IHDR", ihdr);
    chunk("IDAT", compressed);
    chunk("IEND", {});
    return out;
}

}  // namespace

TEST_CASE("png round trip is lossless for rgb and gray") {
    const auto img = random_image(13, 9, 1);
    const auto path = tmp_dir() / "rt.png";
    encode_image(img, path);
    const ImageRGB back = decode_image(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);

    GrayImage g(7, 5);
    Rng rng(2);
    for (auto& p : g.pixels) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    const auto gpath = tmp_dir() / "rt_gray.png";
    encode_gray(g, gpath);
    const GrayImage gback = decode_gray(gpath);
    CHECK(gback.pixels == g.pixels);
}

TEST_CASE("png decoder handles every filter type") {
    const auto img = random_image(17, 11, 3);
    for (std::uint8_t filter = 0; filter <= 4; ++filter) {
        const auto path = tmp_dir() / ("filter" + std::to_string(filter) + ".png");
        write_bytes(path, png_with_filter(img, filter));
        const ImageRGB back = decode_image(path);
        CAPTURE(static_cast<int>(filter));
        CHECK(back.pixels == img.pixels);
    }
}

TEST_CASE("decode errors carry a byte offset") {
    const auto empty = tmp_dir() / "empty.png";
    write_bytes(empty, {});
    CHECK_THROWS_WITH_AS(decode_image(empty), doctest::Contains("offset"), FormatError);

    // truncate a valid png in the middle of a chunk
    const auto img = random_image(8, 8, 4);
    auto bytes = encode_png_rgb(img);
    bytes.resize(bytes.size() / 2);
    const auto trunc = tmp_dir() / "trunc.png";
    write_bytes(trunc, bytes);
    CHECK_THROWS_AS(decode_image(trunc), FormatError);

    // neither a png signature nor a pnm magic
    const auto junk = tmp_dir() / "junk.png";
    write_bytes(junk, {'h', 'e', 'l', 'l', 'o', ' ', 'w', 'o', 'r', 'l', 'd'});
    CHECK_THROWS_WITH_AS(decode_image(junk), doctest::Contains("unsupported"), FormatError);
}

TEST_CASE("ppm fixture bytes decode to the expected pixels") {
    // hand-built 2x2 P6 file
    const std::vector<std::uint8_t> ppm = {
        'P', '6', '\n', '2', ' ', '2', '\n', '2', '5', '5', '\n',
        10, 20, 30,  40, 50, 60,  70, 80, 90,  100, 110, 120};
    const auto path = tmp_dir() / "fixture.ppm";
    write_bytes(path, ppm);
    const ImageRGB img = decode_image(path);
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 2);
    CHECK(img.at(0, 0)[0] == 10);
    CHECK(img.at(1, 0)[1] == 50);
    CHECK(img.at(0, 1)[2] == 90);
    CHECK(img.at(1, 1)[0] == 100);

    // ppm round trip
    const auto img2 = random_image(5, 4, 5);
    const auto p2 = tmp_dir() / "rt.ppm";
    encode_image(img2, p2);
    CHECK(decode_image(p2).pixels == img2.pixels);

    // pgm round trip
    GrayImage g(4, 3);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = static_cast<std::uint8_t>(i * 20);
    const auto p3 = tmp_dir() / "rt.pgm";
    encode_gray(g, p3);
    CHECK(decode_gray(p3).pixels == g.pixels);
}

TEST_CASE("crop_bbox cases") {
    ImageRGB img(20, 20);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            img.at(x, y)[0] = static_cast<std::uint8_t>(x);
            img.at(x, y)[1] = static_cast<std::uint8_t>(y);
        }
    }
    const ImageRGB tl = crop_bbox(img, {0, 0, 9, 9}, 0);
    CHECK(tl.width == 10);
    CHECK(tl.height == 10);
    CHECK(tl.at(9, 9)[0] == 9);

    // margin clamps at the border
    const ImageRGB cl = crop_bbox(img, {0, 0, 3, 3}, 5);
    CHECK(cl.width == 9);  // 0..8
    CHECK(cl.height == 9);

    // bbox (5,5,8,8) margin 2 -> (3,3)-(10,10), 8x8
    const ImageRGB mid = crop_bbox(img, {5, 5, 8, 8}, 2);
    CHECK(mid.width == 8);
    CHECK(mid.height == 8);
    CHECK(mid.at(0, 0)[0] == 3);
    CHECK(mid.at(7, 7)[0] == 10);

    CHECK_THROWS_AS(crop_bbox(img, {9, 0, 5, 5}, 0), ArgumentError);
    CHECK_THROWS_AS(crop_bbox(img, {0, 0, 25, 5}, 0), ArgumentError);
}

TEST_CASE("pad_to_square placement and inversion") {
    const ImageRGB patch = random_image(100, 80, 6);
    PadPlacement place;
    const ImageRGB padded = pad_to_square(patch, 224, &place);
    CHECK(place.offset_x == 62);
    CHECK(place.offset_y == 72);
    CHECK(place.resized_w == 100);
    CHECK(place.resized_h == 80);
    CHECK(padded.width == 224);
    // pixels outside the patch are zero
    CHECK(padded.at(0, 0)[0] == 0);
    CHECK(padded.at(223, 223)[2] == 0);
    // cropping back at the placement recovers the patch bitwise
    const ImageRGB back = crop_bbox(
        padded, {place.offset_x, place.offset_y, place.offset_x + place.resized_w - 1,
                 place.offset_y + place.resized_h - 1},
        0);
    CHECK(back.pixels == patch.pixels);

    const ImageRGB same = random_image(224, 224, 7);
    PadPlacement p2;
    const ImageRGB out = pad_to_square(same, 224, &p2);
    CHECK(p2.offset_x == 0);
    CHECK(p2.offset_y == 0);
    CHECK(out.pixels == same.pixels);
}

TEST_CASE("pad_to_square downscales oversized patches first") {
    const ImageRGB patch = random_image(300, 150, 8);
    PadPlacement place;
    const ImageRGB padded = pad_to_square(patch, 224, &place);
    CHECK(place.resized_w == 224);
    CHECK(place.resized_h == 112);
    CHECK(place.offset_x == 0);
    CHECK(place.offset_y == 56);

    // mask overload keeps binarity
    const BinaryMask mask = random_mask(300, 150, 9);
    PadPlacement mp;
    const BinaryMask mpad = pad_to_square(mask, 224, &mp);
    CHECK(mp.resized_w == 224);
    for (auto v : mpad.pixels) CHECK(v <= 1);
}

TEST_CASE("normalize maps 0/128/255 to the documented values") {
    ImageRGB img(2, 1);
    img.at(0, 0)[0] = 0;
    img.at(0, 0)[1] = 128;
    img.at(0, 0)[2] = 255;
    const Tensor t = normalize(img);
    REQUIRE(t.shape == std::vector<int>{1, 3, 1, 2});
    CHECK(t.at4(0, 0, 0, 0) == doctest::Approx(-1.0f));
    CHECK(t.at4(0, 1, 0, 0) == doctest::Approx(128.0f / 127.5f - 1.0f).epsilon(1e-6));
    CHECK(t.at4(0, 1, 0, 0) == doctest::Approx(0.003921f).epsilon(1e-3));
    CHECK(t.at4(0, 2, 0, 0) == doctest::Approx(1.0f));
}

TEST_CASE("threshold_mask is a strict-greater decision and monotone") {
    GrayImage g(2, 1);
    g.at(0, 0) = 127;
    g.at(1, 0) = 128;
    const BinaryMask m = threshold_mask(g);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(1, 0) == 1);

    const GrayImage zeros(5, 5);
    CHECK(threshold_mask(zeros).foreground_count() == 0);

    // raising a pixel never flips 1 -> 0
    Rng rng(11);
    GrayImage a(16, 16);
    for (auto& p : a.pixels) p = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
    GrayImage b = a;
    for (auto& p : b.pixels) {
        p = static_cast<std::uint8_t>(std::min(255, p + static_cast<int>(rng.next_u64() % 40)));
    }
    const BinaryMask ma = threshold_mask(a), mb = threshold_mask(b);
    for (std::size_t i = 0; i < ma.pixels.size(); ++i) CHECK(mb.pixels[i] >= ma.pixels[i]);
}

TEST_CASE("probability quantization around one half") {
    CHECK(quantize_probability(0.5f) == 128);
    CHECK(quantize_probability(0.49999f) == 127);
    CHECK(quantize_probability(0.0f) == 0);
    CHECK(quantize_probability(1.0f) == 255);
}

TEST_CASE("hflip augmentation is an involution") {
    AugmentSpec spec;
    spec.hflip = true;
    spec.hflip_p = 1.0;
    spec.vflip = spec.rotate = spec.brightness = false;
    spec.seed = 5;
    const ImageRGB img = random_image(15, 11, 12);
    const BinaryMask mask = random_mask(15, 11, 13);
    auto [i1, m1] = augment(img, mask, spec);
    auto [i2, m2] = augment(i1, m1, spec);
    CHECK(i2.pixels == img.pixels);
    CHECK(m2.pixels == mask.pixels);
    CHECK(i1.pixels != img.pixels);
}

TEST_CASE("augment is deterministic per seed") {
    AugmentSpec spec;
    spec.seed = 99;
    const ImageRGB img = random_image(20, 20, 14);
    const BinaryMask mask = random_mask(20, 20, 15);
    auto [a_img, a_mask] = augment(img, mask, spec);
    auto [b_img, b_mask] = augment(img, mask, spec);
    CHECK(a_img.pixels == b_img.pixels);
    CHECK(a_mask.pixels == b_mask.pixels);

    CHECK_THROWS_AS(augment(img, random_mask(5, 5, 1), spec), DimensionError);
}

TEST_CASE("rotation keeps masks binary and roughly preserves area") {
    AugmentSpec spec;
    spec.hflip = spec.vflip = spec.brightness = false;
    spec.rotate = true;
    spec.rotate_p = 1.0;
    spec.rotate_degrees = 15.0;

    // centered disc mask so the rotation cannot clip it
    ImageRGB img(40, 40);
    BinaryMask mask(40, 40);
    for (int y = 0; y < 40; ++y) {
        for (int x = 0; x < 40; ++x) {
            const int dx = x - 20, dy = y - 20;
            if (dx * dx + dy * dy <= 100) mask.at(x, y) = 1;
        }
    }
    const double area = static_cast<double>(mask.foreground_count());
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        AugmentSpec s = spec;
        s.seed = seed;
        auto [ri, rm] = augment(img, mask, s);
        for (auto v : rm.pixels) REQUIRE(v <= 1);
        const double ratio = static_cast<double>(rm.foreground_count()) / area;
        CHECK(std::abs(ratio - 1.0) < 0.10);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("mask_to_bbox cases") {
    BinaryMask m(12, 10);
    CHECK_FALSE(mask_to_bbox(m).has_value());

    m.at(7, 5) = 1;
    const auto single = mask_to_bbox(m);
    REQUIRE(single.has_value());
    CHECK(single->x_min == 7);
    CHECK(single->y_min == 5);
    CHECK(single->x_max == 7);
    CHECK(single->y_max == 5);

    // two corner blobs span the whole diagonal
    BinaryMask two(16, 16);
    two.at(1, 2) = 1;
    two.at(14, 13) = 1;
    const auto span = mask_to_bbox(two);
    REQUIRE(span.has_value());
    CHECK(span->x_min == 1);
    CHECK(span->y_min == 2);
    CHECK(span->x_max == 14);
    CHECK(span->y_max == 13);

    const auto margined = mask_to_bbox(two, 3);
    CHECK(margined->x_min == 0);
    CHECK(margined->y_min == 0);
    CHECK(margined->x_max == 15);
    CHECK(margined->y_max == 15);
}
