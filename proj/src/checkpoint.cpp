#include "sawu/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>

#include "sawu/errors.hpp"

namespace sawu {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'W', 'U', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v & 0xff),
                                   static_cast<unsigned char>((v >> 8) & 0xff),
                                   static_cast<unsigned char>((v >> 16) & 0xff),
                                   static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    std::array<unsigned char, 4> b{};
    is.read(reinterpret_cast<char*>(b.data()), 4);
    if (!is) throw IoError("checkpoint truncated: " + path);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    std::array<unsigned char, 8> b{};
    is.read(reinterpret_cast<char*>(b.data()), 8);
    if (!is) throw IoError("checkpoint truncated: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    const std::uint64_t bits = get_u64(is, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.rows()));
    put_u32(os, static_cast<std::uint32_t>(t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(os, t[i]);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    os.put(ckpt.variant == NetVariant::Sawu ? 0 : 1);
    const ModelConfig& c = ckpt.config;
    put_u32(os, static_cast<std::uint32_t>(c.window));
    put_u32(os, static_cast<std::uint32_t>(c.endmembers));
    put_u32(os, static_cast<std::uint32_t>(c.bands));
    put_u32(os, static_cast<std::uint32_t>(c.maxiter));
    put_u32(os, static_cast<std::uint32_t>(c.batch_size));
    put_f64(os, c.lambda1);
    put_f64(os, c.lambda2);
    put_f64(os, c.dropout_rate);
    put_f64(os, c.asc_eps);
    put_f64(os, c.lr_encoder);
    put_f64(os, c.lr_decoder);
    os.put(c.use_pixel_attention ? 1 : 0);
    put_u64(os, c.seed);

    const ModelParams& p = ckpt.params;
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    if (ckpt.variant == NetVariant::Sawu) {
        tensors.emplace_back("pa_scale", &p.pa_scale);
        tensors.emplace_back("pa_bias", &p.pa_bias);
        tensors.emplace_back("wa_weight", &p.wa_weight);
        tensors.emplace_back("wa_bias", &p.wa_bias);
    }
    tensors.emplace_back("enc_weight", &p.enc_weight);
    tensors.emplace_back("bn_gamma", &p.bn_gamma);
    tensors.emplace_back("bn_beta", &p.bn_beta);
    tensors.emplace_back("bn_running_mean", &p.bn.mean);
    tensors.emplace_back("bn_running_var", &p.bn.var);
    tensors.emplace_back("dec_weight", &p.dec_weight);

    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) put_tensor(os, name, *t);
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = get_u32(is, path);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);

    Checkpoint ckpt;
    const int variant_byte = is.get();
    if (variant_byte != 0 && variant_byte != 1) throw IoError("bad variant byte: " + path);
    ckpt.variant = variant_byte == 0 ? NetVariant::Sawu : NetVariant::Baseline;

    ModelConfig& c = ckpt.config;
    c.window = get_u32(is, path);
    c.endmembers = get_u32(is, path);
    c.bands = get_u32(is, path);
    c.maxiter = get_u32(is, path);
    c.batch_size = get_u32(is, path);
    c.lambda1 = get_f64(is, path);
    c.lambda2 = get_f64(is, path);
    c.dropout_rate = get_f64(is, path);
    c.asc_eps = get_f64(is, path);
    c.lr_encoder = get_f64(is, path);
    c.lr_decoder = get_f64(is, path);
    const int pa_byte = is.get();
    if (pa_byte != 0 && pa_byte != 1) throw IoError("bad flag byte: " + path);
    c.use_pixel_attention = pa_byte == 1;
    c.seed = get_u64(is, path);

    std::map<std::string, Tensor> tensors;
    const std::uint32_t count = get_u32(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IoError("checkpoint truncated: " + path);
        const std::uint32_t rows = get_u32(is, path);
        const std::uint32_t cols = get_u32(is, path);
        Tensor t(rows, cols);
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = get_f64(is, path);
        tensors.emplace(std::move(name), std::move(t));
    }

    auto take = [&](const char* name) {
        auto it = tensors.find(name);
        if (it == tensors.end())
            throw IoError("checkpoint missing tensor '" + std::string(name) + "': " + path);
        return std::move(it->second);
    };
    ModelParams& p = ckpt.params;
    if (ckpt.variant == NetVariant::Sawu) {
        p.pa_scale = take("pa_scale");
        p.pa_bias = take("pa_bias");
        p.wa_weight = take("wa_weight");
        p.wa_bias = take("wa_bias");
    }
    p.enc_weight = take("enc_weight");
    p.bn_gamma = take("bn_gamma");
    p.bn_beta = take("bn_beta");
    p.bn.mean = take("bn_running_mean");
    p.bn.var = take("bn_running_var");
    p.dec_weight = take("dec_weight");
    return ckpt;
}

}  // namespace sawu
