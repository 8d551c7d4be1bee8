#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "ehrl/error.hpp"
#include "ehrl/mlp.hpp"

namespace ehrl {

// Binary container of named records.
//
//   "EHRLCKPT" | u32 version | u32 record count
//   per record: u32 kind | u32 name length | name | u64 payload length | payload
//
// Network payload: u32 scalar bytes | u32 activation | u32 layer-size count |
// i32 sizes... | per layer: weights row-major (out x in), then biases.
// Integers and floats are stored little-endian in host layout.
enum class RecordKind : std::uint32_t { mlp = 1, qtable = 2, metadata = 3 };

inline constexpr char checkpoint_magic[8] = {'E', 'H', 'R', 'L', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t checkpoint_version = 1;

class ByteWriter {
public:
    template <typename T>
    void put(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_string(const std::string& s) {
        put(static_cast<std::uint32_t>(s.size()));
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    std::vector<char> take() { return std::move(bytes_); }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<char>& b) : b_(b) {}
    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > b_.size()) throw IoError("checkpoint record truncated");
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        auto n = get<std::uint32_t>();
        if (pos_ + n > b_.size()) throw IoError("checkpoint record truncated");
        std::string s(b_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    const std::vector<char>& b_;
    std::size_t pos_ = 0;
};

template <typename Scalar>
inline std::vector<char> encode_mlp(const Mlp<Scalar>& m) {
    ByteWriter w;
    w.put(static_cast<std::uint32_t>(sizeof(Scalar)));
    w.put(static_cast<std::uint32_t>(m.activation()));
    w.put(static_cast<std::uint32_t>(m.dims().size()));
    for (int d : m.dims()) w.put(static_cast<std::int32_t>(d));
    for (const auto& l : m.layers()) {
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) w.put(l.w(r, c));
        for (Eigen::Index r = 0; r < l.b.size(); ++r) w.put(l.b(r));
    }
    return w.take();
}

template <typename Scalar>
inline Mlp<Scalar> decode_mlp(const std::vector<char>& bytes) {
    ByteReader r(bytes);
    if (r.get<std::uint32_t>() != sizeof(Scalar)) throw IoError("checkpoint network has a different scalar width");
    auto act = static_cast<HiddenActivation>(r.get<std::uint32_t>());
    auto n = r.get<std::uint32_t>();
    if (n < 2 || n > 64) throw IoError("checkpoint network has an implausible layer count");
    std::vector<int> dims;
    for (std::uint32_t i = 0; i < n; ++i) {
        auto d = r.get<std::int32_t>();
        if (d <= 0) throw IoError("checkpoint network has a non-positive layer size");
        dims.push_back(d);
    }
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer<Scalar> layer{Mat<Scalar>(dims[l + 1], dims[l]), Vec<Scalar>(dims[l + 1])};
        for (Eigen::Index row = 0; row < layer.w.rows(); ++row)
            for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(row, c) = r.get<Scalar>();
        for (Eigen::Index row = 0; row < layer.b.size(); ++row) layer.b(row) = r.get<Scalar>();
        layers.push_back(std::move(layer));
    }
    if (!r.done()) throw IoError("checkpoint network record has trailing bytes");
    return Mlp<Scalar>::from_layers(std::move(dims), act, std::move(layers));
}

class Checkpoint {
public:
    struct Record {
        RecordKind kind;
        std::vector<char> payload;
    };

    void put_record(const std::string& name, RecordKind kind, std::vector<char> payload) {
        records_[name] = Record{kind, std::move(payload)};
    }
    const Record& record(const std::string& name, RecordKind kind) const {
        auto it = records_.find(name);
        if (it == records_.end()) throw IoError("checkpoint has no record '" + name + "'");
        if (it->second.kind != kind) throw IoError("checkpoint record '" + name + "' has a different kind");
        return it->second;
    }
    bool has(const std::string& name) const { return records_.count(name) > 0; }

    template <typename Scalar>
    void put(const std::string& name, const Mlp<Scalar>& m) {
        put_record(name, RecordKind::mlp, encode_mlp(m));
    }
    template <typename Scalar>
    Mlp<Scalar> get_mlp(const std::string& name) const {
        return decode_mlp<Scalar>(record(name, RecordKind::mlp).payload);
    }

    void write(std::ostream& out) const {
        out.write(checkpoint_magic, sizeof(checkpoint_magic));
        auto put32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); };
        put32(checkpoint_version);
        put32(static_cast<std::uint32_t>(records_.size()));
        for (const auto& [name, rec] : records_) {
            put32(static_cast<std::uint32_t>(rec.kind));
            put32(static_cast<std::uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            std::uint64_t len = rec.payload.size();
            out.write(reinterpret_cast<const char*>(&len), sizeof len);
            out.write(rec.payload.data(), static_cast<std::streamsize>(rec.payload.size()));
        }
        if (!out) throw IoError("failed writing checkpoint");
    }

    static Checkpoint read(std::istream& in) {
        char magic[8];
        in.read(magic, sizeof magic);
        if (!in || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0) throw IoError("not a checkpoint file (bad magic)");
        auto get32 = [&]() {
            std::uint32_t v = 0;
            in.read(reinterpret_cast<char*>(&v), sizeof v);
            if (!in) throw IoError("checkpoint truncated");
            return v;
        };
        if (get32() != checkpoint_version) throw IoError("unsupported checkpoint version");
        Checkpoint c;
        const auto count = get32();
        for (std::uint32_t i = 0; i < count; ++i) {
            auto kind = static_cast<RecordKind>(get32());
            auto nlen = get32();
            if (nlen > 4096) throw IoError("checkpoint record name too long");
            std::string name(nlen, '\0');
            in.read(name.data(), nlen);
            std::uint64_t len = 0;
            in.read(reinterpret_cast<char*>(&len), sizeof len);
            if (!in || len > (1ULL << 34)) throw IoError("checkpoint truncated");
            std::vector<char> payload(len);
            in.read(payload.data(), static_cast<std::streamsize>(len));
            if (!in) throw IoError("checkpoint truncated");
            c.put_record(name, kind, std::move(payload));
        }
        return c;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + path.string());
        write(out);
    }
    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot open checkpoint " + path.string());
        return read(in);
    }

private:
    std::map<std::string, Record> records_;
};

} // namespace ehrl
