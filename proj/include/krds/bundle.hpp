#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "krds/policy.hpp"

namespace krds {

inline constexpr int kBundleFormatVersion = 1;

/// Everything needed to run a trained agent: the ontology that fixes the
/// action layout, the turn limit baked into the state encoding, and the
/// network itself.
struct PolicyBundle {
    Ontology ontology;
    int max_turns = 22;
    KrDqn policy;

    friend bool operator==(const PolicyBundle&, const PolicyBundle&) = default;
};

struct BundleError : Error {
    using Error::Error;
};

namespace detail {

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

inline Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* name) {
    if (!j.is_array() || j.size() != rows) throw BundleError(std::string("bundle: bad row count for ") + name);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw BundleError(std::string("bundle: bad column count for ") + name);
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

inline Vector vector_from_json(const json& j, std::size_t size, const char* name) {
    if (!j.is_array() || j.size() != size) throw BundleError(std::string("bundle: bad length for ") + name);
    Vector v(size);
    for (std::size_t i = 0; i < size; ++i) v(i) = j[i].get<double>();
    return v;
}

inline json flags_to_json(const PolicyFlags& f) {
    return json{{"variant", to_string(f.variant)},
                {"symptom_filter", f.symptom_filter},
                {"renormalize_relation", f.renormalize_relation}};
}

inline PolicyFlags flags_from_json(const json& j) {
    PolicyFlags f;
    f.variant = variant_from_string(j.at("variant").get<std::string>());
    f.symptom_filter = j.at("symptom_filter").get<bool>();
    f.renormalize_relation = j.at("renormalize_relation").get<bool>();
    return f;
}

inline void check_hash(const Ontology& embedded, const std::string& stored, const std::optional<Ontology>& expected) {
    if (embedded.hash_hex() != stored)
        throw BundleError("bundle: ontology hash mismatch (stored " + stored + ", embedded ontology hashes to " +
                          embedded.hash_hex() + ")");
    if (expected && expected->hash_hex() != stored)
        throw BundleError("bundle: ontology hash mismatch (bundle " + stored + ", expected " +
                          expected->hash_hex() + ")");
}

// Little-endian primitives for the binary format.
class ByteWriter {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const std::string& s) {
        u64(s.size());
        out_.append(s);
    }
    void matrix(const Matrix& m) {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
    void vector(const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
    }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    const std::string& str() const { return out_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& in) : in_(in) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes() {
        const auto n = u64();
        need(n);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = f64();
        return m;
    }
    Vector vector(std::size_t n) {
        Vector v(n);
        for (std::size_t i = 0; i < n; ++i) v(i) = f64();
        return v;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::uint64_t n) const {
        if (pos_ + n > in_.size()) throw BundleError("bundle: truncated binary file");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::string& in_;
    std::size_t pos_ = 0;
};

inline constexpr char kBinaryMagic[4] = {'K', 'R', 'D', 'Q'};

inline std::uint32_t flag_bits(const PolicyFlags& f) {
    return static_cast<std::uint32_t>(f.variant) | (f.symptom_filter ? 0x100u : 0u) |
           (f.renormalize_relation ? 0x200u : 0u);
}

inline PolicyFlags flags_from_bits(std::uint32_t bits) {
    PolicyFlags f;
    const auto v = bits & 0xffu;
    if (v > static_cast<std::uint32_t>(Variant::full)) throw BundleError("bundle: unknown variant code");
    f.variant = static_cast<Variant>(v);
    f.symptom_filter = (bits & 0x100u) != 0;
    f.renormalize_relation = (bits & 0x200u) != 0;
    return f;
}

} // namespace detail

inline json bundle_to_json(const PolicyBundle& b) {
    const auto& p = b.policy.params();
    const auto& kb = b.policy.knowledge();
    return json{{"format_version", kBundleFormatVersion},
                {"ontology_hash", b.ontology.hash_hex()},
                {"S", b.policy.state_dim()},
                {"H", b.policy.hidden()},
                {"D", b.policy.actions()},
                {"max_turns", b.max_turns},
                {"flags", detail::flags_to_json(b.policy.flags())},
                {"ontology", ontology_to_json(b.ontology)},
                {"W1", detail::matrix_to_json(p.w1)},
                {"b1", detail::vector_to_json(p.b1)},
                {"W2", detail::matrix_to_json(p.w2)},
                {"b2", detail::vector_to_json(p.b2)},
                {"R", detail::matrix_to_json(b.policy.relation())},
                {"knowledge",
                 {{"greetings", kb.greetings},
                  {"p_dis_given_sym", detail::matrix_to_json(kb.p_dis_given_sym)},
                  {"p_sym_given_dis", detail::matrix_to_json(kb.p_sym_given_dis)},
                  {"p_sym_prior", detail::vector_to_json(kb.p_sym_prior)}}}};
}

inline PolicyBundle bundle_from_json(const json& j, const std::optional<Ontology>& expected = std::nullopt) {
    try {
        if (j.at("format_version").get<int>() != kBundleFormatVersion)
            throw BundleError("bundle: unsupported format_version");
        PolicyBundle b;
        b.ontology = ontology_from_json(j.at("ontology"));
        detail::check_hash(b.ontology, j.at("ontology_hash").get<std::string>(), expected);
        b.max_turns = j.at("max_turns").get<int>();
        const auto s = j.at("S").get<std::size_t>();
        const auto h = j.at("H").get<std::size_t>();
        const auto d = j.at("D").get<std::size_t>();
        if (d != b.ontology.num_actions()) throw BundleError("bundle: D disagrees with the ontology");
        if (s != state_dim(b.ontology, b.max_turns)) throw BundleError("bundle: S disagrees with the state layout");
        QNetworkParams p{detail::matrix_from_json(j.at("W1"), h, s, "W1"), detail::vector_from_json(j.at("b1"), h, "b1"),
                         detail::matrix_from_json(j.at("W2"), d, h, "W2"), detail::vector_from_json(j.at("b2"), d, "b2")};
        Matrix r = detail::matrix_from_json(j.at("R"), d, d, "R");
        const auto& k = j.at("knowledge");
        const auto m = b.ontology.num_diseases();
        const auto n = b.ontology.num_symptoms();
        KnowledgeBranch kb{k.at("greetings").get<std::size_t>(),
                           detail::matrix_from_json(k.at("p_dis_given_sym"), m, n, "p_dis_given_sym"),
                           detail::matrix_from_json(k.at("p_sym_given_dis"), n, m, "p_sym_given_dis"),
                           detail::vector_from_json(k.at("p_sym_prior"), n, "p_sym_prior")};
        b.policy = KrDqn(std::move(p), std::move(r), std::move(kb), detail::flags_from_json(j.at("flags")));
        return b;
    } catch (const json::exception& e) {
        throw BundleError(std::string("bundle: ") + e.what());
    }
}

inline std::string bundle_to_binary(const PolicyBundle& b) {
    detail::ByteWriter w;
    const auto& p = b.policy.params();
    const auto& kb = b.policy.knowledge();
    w.raw(detail::kBinaryMagic, 4);
    w.u32(kBundleFormatVersion);
    w.u64(b.ontology.hash());
    w.u64(b.policy.state_dim());
    w.u64(b.policy.hidden());
    w.u64(b.policy.actions());
    w.u32(detail::flag_bits(b.policy.flags()));
    w.u32(static_cast<std::uint32_t>(b.max_turns));
    w.bytes(ontology_to_json(b.ontology).dump());
    w.matrix(p.w1);
    w.vector(p.b1);
    w.matrix(p.w2);
    w.vector(p.b2);
    w.matrix(b.policy.relation());
    w.u64(kb.greetings);
    w.matrix(kb.p_dis_given_sym);
    w.matrix(kb.p_sym_given_dis);
    w.vector(kb.p_sym_prior);
    return w.str();
}

inline PolicyBundle bundle_from_binary(const std::string& data, const std::optional<Ontology>& expected = std::nullopt) {
    detail::ByteReader r(data);
    if (r.raw(4) != std::string(detail::kBinaryMagic, 4)) throw BundleError("bundle: bad magic");
    if (r.u32() != kBundleFormatVersion) throw BundleError("bundle: unsupported format_version");
    const auto hash = r.u64();
    const auto s = r.u64();
    const auto h = r.u64();
    const auto d = r.u64();
    const auto flags = detail::flags_from_bits(r.u32());
    PolicyBundle b;
    b.max_turns = static_cast<int>(r.u32());
    try {
        b.ontology = ontology_from_json(json::parse(r.bytes()));
    } catch (const json::exception& e) {
        throw BundleError(std::string("bundle: ontology block: ") + e.what());
    }
    std::ostringstream hex;
    hex << std::hex;
    hex.width(16);
    hex.fill('0');
    hex << hash;
    detail::check_hash(b.ontology, hex.str(), expected);
    if (d != b.ontology.num_actions()) throw BundleError("bundle: D disagrees with the ontology");
    if (s != state_dim(b.ontology, b.max_turns)) throw BundleError("bundle: S disagrees with the state layout");
    QNetworkParams p;
    p.w1 = r.matrix(h, s);
    p.b1 = r.vector(h);
    p.w2 = r.matrix(d, h);
    p.b2 = r.vector(d);
    Matrix rel = r.matrix(d, d);
    KnowledgeBranch kb;
    kb.greetings = r.u64();
    kb.p_dis_given_sym = r.matrix(b.ontology.num_diseases(), b.ontology.num_symptoms());
    kb.p_sym_given_dis = r.matrix(b.ontology.num_symptoms(), b.ontology.num_diseases());
    kb.p_sym_prior = r.vector(b.ontology.num_symptoms());
    if (!r.done()) throw BundleError("bundle: trailing bytes");
    b.policy = KrDqn(std::move(p), std::move(rel), std::move(kb), flags);
    return b;
}

enum class BundleFormat { json, binary };

inline BundleFormat format_for_path(const std::filesystem::path& path) {
    return path.extension() == ".bin" ? BundleFormat::binary : BundleFormat::json;
}

inline void save_bundle(const PolicyBundle& b, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw BundleError("cannot write bundle " + path.string());
    if (format_for_path(path) == BundleFormat::binary)
        out << bundle_to_binary(b);
    else
        out << bundle_to_json(b).dump() << '\n';
}

/// Loads either format; binary files are recognized by their magic bytes.
inline PolicyBundle load_bundle(const std::filesystem::path& path, const std::optional<Ontology>& expected = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BundleError("cannot open bundle " + path.string());
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() >= 4 && std::memcmp(data.data(), detail::kBinaryMagic, 4) == 0)
        return bundle_from_binary(data, expected);
    json j;
    try {
        j = json::parse(data);
    } catch (const json::parse_error& e) {
        throw BundleError("bundle " + path.string() + ": " + e.what());
    }
    return bundle_from_json(j, expected);
}

} // namespace krds
