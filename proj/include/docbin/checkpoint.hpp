#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "docbin/errors.hpp"
#include "docbin/nn/adam.hpp"
#include "docbin/nn/layers.hpp"

namespace docbin::ckpt {

using nlohmann::json;

inline constexpr char kMagic[8] = {'D', 'O', 'C', 'B', 'I', 'N', 'C', 'K'};
inline constexpr std::uint32_t kVersion = 1;

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    return s;
}

/// Stable hash of a JSON document (keys are sorted by nlohmann::json).
inline std::string config_hash(const json& config) {
    const auto text = config.dump();
    return hex64(fnv1a(text.data(), text.size()));
}

/// One line per differing leaf: "/path: old -> new".
inline std::string config_diff(const json& from, const json& to) {
    std::string out;
    for (const auto& op : json::diff(from, to)) {
        const std::string path = op.at("path");
        const auto old_value = from.contains(json::json_pointer(path)) ? from.at(json::json_pointer(path)).dump() : "<absent>";
        const auto new_value = op.contains("value") ? op.at("value").dump() : "<absent>";
        out += path + ": " + old_value + " -> " + new_value + "\n";
    }
    return out;
}

inline std::string rng_state(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline void restore_rng(std::mt19937_64& rng, const std::string& state) {
    std::istringstream is(state);
    is >> rng;
    if (!is) throw IntegrityError("checkpoint: unreadable rng state");
}

struct NamedTensor {
    std::string name;
    nn::Tensor<float> tensor;
};

struct Checkpoint {
    std::string component;  // "augnet" or "binet"
    json config;
    std::string config_hash;
    std::int64_t step = 0;
    std::string rng_state;
    json extra = json::object();
    std::vector<NamedTensor> tensors;

    [[nodiscard]] bool has(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return true;
        return false;
    }

    [[nodiscard]] const nn::Tensor<float>& tensor(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t.tensor;
        throw IntegrityError("checkpoint: missing tensor '" + name + "'");
    }

    void add(std::string name, nn::Tensor<float> t) { tensors.push_back({std::move(name), std::move(t)}); }
};

namespace detail {

template <typename V>
void put(std::string& buf, V v) {
    char bytes[sizeof(V)];
    std::memcpy(bytes, &v, sizeof(V));
    buf.append(bytes, sizeof(V));
}

template <typename V>
V get(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(V) > buf.size()) throw IntegrityError("checkpoint: truncated file");
    V v;
    std::memcpy(&v, buf.data() + pos, sizeof(V));
    pos += sizeof(V);
    return v;
}

}  // namespace detail

/// Layout: magic, u32 version, u64 header length, JSON header, float32 tensor
/// blobs in header order, u64 FNV-1a of everything before it. Written via a
/// temporary file and rename.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    json header;
    header["component"] = c.component;
    header["config"] = c.config;
    header["config_hash"] = c.config_hash;
    header["step"] = c.step;
    header["rng_state"] = c.rng_state;
    header["extra"] = c.extra;
    header["tensors"] = json::array();
    for (const auto& t : c.tensors) {
        const auto s = t.tensor.shape();
        header["tensors"].push_back({{"name", t.name}, {"shape", {s.n, s.c, s.h, s.w}}});
    }
    const std::string head = header.dump();

    std::string buf(kMagic, sizeof(kMagic));
    detail::put<std::uint32_t>(buf, kVersion);
    detail::put<std::uint64_t>(buf, head.size());
    buf += head;
    for (const auto& t : c.tensors) {
        const auto& v = t.tensor.storage();
        buf.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
    }
    detail::put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + tmp.string());
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("short write to checkpoint: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof(kMagic) + 4 + 8 + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IntegrityError("not a checkpoint file: " + path.string());
    }
    std::size_t tail = buf.size() - 8;
    const auto stored = detail::get<std::uint64_t>(buf, tail);
    if (stored != fnv1a(buf.data(), buf.size() - 8)) throw IntegrityError("checkpoint checksum mismatch: " + path.string());

    std::size_t pos = sizeof(kMagic);
    const auto version = detail::get<std::uint32_t>(buf, pos);
    if (version != kVersion) throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
    const auto head_len = detail::get<std::uint64_t>(buf, pos);
    if (pos + head_len > buf.size() - 8) throw IntegrityError("checkpoint: header overruns file");
    json header;
    try {
        header = json::parse(buf.substr(pos, head_len));
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint: bad header: ") + e.what());
    }
    pos += head_len;

    Checkpoint c;
    try {
        c.component = header.at("component");
        c.config = header.at("config");
        c.config_hash = header.at("config_hash");
        c.step = header.at("step");
        c.rng_state = header.at("rng_state");
        c.extra = header.at("extra");
        for (const auto& t : header.at("tensors")) {
            const auto& s = t.at("shape");
            const nn::Shape shape{s.at(0), s.at(1), s.at(2), s.at(3)};
            const std::size_t bytes = shape.size() * sizeof(float);
            if (pos + bytes > buf.size() - 8) throw IntegrityError("checkpoint: tensor data overruns file");
            std::vector<float> data(shape.size());
            std::memcpy(data.data(), buf.data() + pos, bytes);
            pos += bytes;
            c.tensors.push_back({t.at("name"), nn::Tensor<float>(shape, std::move(data))});
        }
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("checkpoint: malformed header: ") + e.what());
    }
    if (pos != buf.size() - 8) throw IntegrityError("checkpoint: trailing bytes");
    return c;
}

inline void store_params(Checkpoint& c, const nn::ParamList<float>& params) {
    for (const auto& p : params) c.add(p.name, p.var.value());
}

/// Copies values into existing parameters; names and shapes must match.
inline void load_params(const Checkpoint& c, const nn::ParamList<float>& params) {
    for (auto p : params) {
        const auto& t = c.tensor(p.name);
        if (t.shape() != p.var.shape()) {
            throw IntegrityError("checkpoint: shape mismatch for '" + p.name + "': " + t.shape().str() + " vs " +
                                 p.var.shape().str());
        }
        p.var.mutable_value() = t;
    }
}

inline void store_adam(Checkpoint& c, const std::string& prefix, const nn::Adam<float>& opt) {
    const auto& params = opt.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        c.add(prefix + ".m." + params[k].name, opt.first_moments()[k]);
        c.add(prefix + ".v." + params[k].name, opt.second_moments()[k]);
    }
    c.extra[prefix + ".steps"] = opt.steps();
}

inline void load_adam(const Checkpoint& c, const std::string& prefix, nn::Adam<float>& opt) {
    std::vector<nn::Tensor<float>> m;
    std::vector<nn::Tensor<float>> v;
    for (const auto& p : opt.params()) {
        m.push_back(c.tensor(prefix + ".m." + p.name));
        v.push_back(c.tensor(prefix + ".v." + p.name));
    }
    if (!c.extra.contains(prefix + ".steps")) throw IntegrityError("checkpoint: missing optimizer step count");
    try {
        opt.restore(c.extra.at(prefix + ".steps").get<std::int64_t>(), std::move(m), std::move(v));
    } catch (const std::invalid_argument& e) {
        throw IntegrityError(std::string("checkpoint: ") + e.what());
    }
}

}  // namespace docbin::ckpt
