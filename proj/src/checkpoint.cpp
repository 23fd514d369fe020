#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "wseg/checkpoint.hpp"

namespace wseg {
namespace {

constexpr char kMagic[4] = {'W', 'S', 'E', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t at = 0;

    void need(std::size_t n) const {
        if (at + n > bytes.size()) {
            throw TruncatedFileError("checkpoint truncated at byte " + std::to_string(at));
        }
    }
    std::uint32_t u32() {
        need(4);
        const std::uint32_t v = static_cast<std::uint32_t>(bytes[at]) |
                                (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
                                (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
                                (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
        at += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(&bytes[at]), n);
        at += n;
        return s;
    }
    bool eof() const { return at == bytes.size(); }
};

void append_tensor(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path, int epoch,
                     double best_val_dice) {
    std::ostringstream meta;
    meta << model.config().to_text();
    meta << "epoch=" << epoch << "\n";
    meta.precision(17);
    meta << "best_val_dice=" << best_val_dice << "\n";
    const std::string text = meta.str();

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());

    for (const auto& p : model.parameters()) append_tensor(out, p.name, p.var->value);
    for (const auto& b : model.buffers()) append_tensor(out, b.name, *b.tensor);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path,
                      const std::optional<ModelConfig>& expected, CheckpointInfo* info) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());

    Reader r{bytes};
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw BadMagicError("checkpoint magic bytes are not 'WSEG'");
    }
    r.at = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw BadVersionError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t text_len = r.u32();
    const std::string text = r.str(text_len);

    const ModelConfig config = ModelConfig::from_text(text);
    if (expected && !expected->same_architecture(config)) {
        throw ConfigMismatchError(
            "checkpoint architecture does not match the requested configuration");
    }

    int epoch = 0;
    double best_val_dice = 0.0;
    {
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line)) {
            if (line.rfind("epoch=", 0) == 0) epoch = std::stoi(line.substr(6));
            if (line.rfind("best_val_dice=", 0) == 0) best_val_dice = std::stod(line.substr(14));
        }
    }

    std::map<std::string, Tensor> tensors;
    while (!r.eof()) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FormatError("checkpoint tensor '" + name + "' has absurd rank");
        std::vector<int> shape;
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t d = r.u32();
            if (d == 0 || d > (1u << 24)) {
                throw FormatError("checkpoint tensor '" + name + "' has bad dimension");
            }
            shape.push_back(static_cast<int>(d));
            numel *= d;
        }
        Tensor t(shape);
        for (std::size_t i = 0; i < numel; ++i) t.data[i] = r.f32();
        if (!tensors.emplace(name, std::move(t)).second) {
            throw FormatError("checkpoint has duplicate tensor '" + name + "'");
        }
    }

    Model model(config, 0);
    std::size_t used = 0;
    auto fill = [&](const std::string& name, Tensor& dst) {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw FormatError("checkpoint is missing tensor '" + name + "'");
        }
        if (it->second.shape != dst.shape) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " +
                              shape_str(it->second.shape) + ", model expects " +
                              shape_str(dst.shape));
        }
        dst = std::move(it->second);
        ++used;
    };
    for (auto& p : model.parameters()) fill(p.name, p.var->value);
    for (auto& b : model.buffers()) fill(b.name, *b.tensor);
    if (used != tensors.size()) {
        throw FormatError("checkpoint contains tensors the model does not declare");
    }

    if (info) {
        info->config = config;
        info->epoch = epoch;
        info->best_val_dice = best_val_dice;
    }
    return model;
}

}  // namespace wseg
