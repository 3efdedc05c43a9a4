#include "dscodec/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dscodec/util/random.hpp"

namespace dscodec::train {

namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'D', 'S', 'C', 'K'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

class Fnv {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void tensor(const std::string& name, const ad::Shape& shape, const std::vector<float>& data) {
        bytes(name.data(), name.size());
        for (auto d : shape) {
            std::uint8_t b[8];
            for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(d) >> (8 * i));
            bytes(b, 8);
        }
        for (float f : data) {
            const auto u = std::bit_cast<std::uint32_t>(f);
            std::uint8_t b[4] = {static_cast<std::uint8_t>(u), static_cast<std::uint8_t>(u >> 8),
                                 static_cast<std::uint8_t>(u >> 16), static_cast<std::uint8_t>(u >> 24)};
            bytes(b, 4);
        }
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

}  // namespace

std::string curve_to_ndjson(const std::vector<CurveRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += Json{{"step", r.step}, {"loss_name", r.name}, {"value", r.value}}.dump();
        out += '\n';
    }
    return out;
}

std::vector<CurveRecord> curve_from_ndjson(const std::string& text) {
    std::vector<CurveRecord> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = Json::parse(line);
        out.push_back({j.at("step").get<std::int64_t>(), j.at("loss_name").get<std::string>(), j.at("value").get<double>()});
    }
    return out;
}

std::vector<double> curve_series(const std::vector<CurveRecord>& records, const std::string& name) {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.name == name) out.push_back(r.value);
    return out;
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
    Json tensors_j = Json::array();
    for (const auto& t : tensors) {
        if (static_cast<std::int64_t>(t.data.size()) != ad::numel(t.shape))
            throw CheckpointError("tensor " + t.name + " data does not match its shape");
        tensors_j.push_back({{"name", t.name}, {"shape", t.shape}});
    }
    Json curves_j = Json::array();
    for (const auto& r : curves) curves_j.push_back(Json::array({r.step, r.name, r.value}));
    Json manifest = {{"format_version", kVersion},
                     {"stage", stage},
                     {"step", step},
                     {"config_hash", hex(config.codec_id())},
                     {"config", config.to_json()},
                     {"discriminators", discriminators.to_json()},
                     {"rng_state", rng_state},
                     {"optimizer", {{"generator_steps", generator_steps}, {"discriminator_steps", discriminator_steps}}},
                     {"tensors", tensors_j},
                     {"curves", curves_j}};
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& t : tensors)
        for (float f : t.data) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto mlen = get_le<std::uint64_t>(bytes.data() + 8);
    if (mlen > bytes.size() - 16) throw CheckpointError("checkpoint truncated in manifest");
    Json m;
    try {
        m = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
    } catch (const Json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
    }
    Checkpoint c;
    c.stage = m.at("stage").get<std::string>();
    c.step = m.at("step").get<std::int64_t>();
    c.config = codec::CodecConfig::from_json(m.at("config"));
    c.discriminators = adv::DiscriminatorConfig::from_json(m.at("discriminators"));
    if (m.at("config_hash").get<std::string>() != hex(c.config.codec_id()))
        throw CheckpointError("checkpoint config hash does not match its config");
    c.rng_state = m.at("rng_state").get<std::string>();
    c.generator_steps = m.at("optimizer").at("generator_steps").get<std::int64_t>();
    c.discriminator_steps = m.at("optimizer").at("discriminator_steps").get<std::int64_t>();
    std::size_t pos = 16 + static_cast<std::size_t>(mlen);
    for (const auto& tj : m.at("tensors")) {
        TensorBlob t;
        t.name = tj.at("name").get<std::string>();
        t.shape = tj.at("shape").get<ad::Shape>();
        const auto n = static_cast<std::size_t>(ad::numel(t.shape));
        if (n > (bytes.size() - pos) / 4) throw CheckpointError("checkpoint truncated in tensor " + t.name);
        t.data.resize(n);
        for (std::size_t i = 0; i < n; ++i, pos += 4) t.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + pos));
        c.tensors.push_back(std::move(t));
    }
    if (pos != bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
    for (const auto& r : m.at("curves"))
        c.curves.push_back({r.at(0).get<std::int64_t>(), r.at(1).get<std::string>(), r.at(2).get<double>()});
    return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw CheckpointError("cannot write " + tmp);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw CheckpointError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

const TensorBlob* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

std::uint64_t Checkpoint::hash(const std::string& prefix) const {
    Fnv h;
    for (const auto& t : tensors)
        if (t.name.rfind(prefix, 0) == 0) h.tensor(t.name, t.shape, t.data);
    return h.value();
}

void Checkpoint::store(const nn::ParamList& params) {
    for (const auto& p : params) tensors.push_back({p.name, p.var.shape(), to_f32(p.var.values())});
}

void Checkpoint::restore(const nn::ParamList& params) const {
    for (const auto& p : params) {
        const auto* t = find(p.name);
        if (!t) throw CheckpointError("checkpoint has no tensor '" + p.name + "'");
        if (t->shape != p.var.shape())
            throw CheckpointError("shape mismatch for '" + p.name + "': checkpoint " + ad::shape_str(t->shape) +
                                  ", model " + ad::shape_str(p.var.shape()));
        auto& v = p.var.node()->value;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(t->data[i]);
    }
}

std::uint64_t hash_params(const nn::ParamList& params) {
    Fnv h;
    for (const auto& p : params) h.tensor(p.name, p.var.shape(), to_f32(p.var.values()));
    return h.value();
}

}  // namespace dscodec::train
