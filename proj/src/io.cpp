#include "tinyvim/io.hpp"

#include <cstring>
#include <fstream>

namespace tinyvim {

namespace {

void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
void put_scalar(std::string& out, T v) {
    if constexpr (std::is_same_v<T, float>) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    } else {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u32(out, static_cast<uint32_t>(bits & 0xffffffffULL));
        put_u32(out, static_cast<uint32_t>(bits >> 32));
    }
}

class Reader {
public:
    Reader(const std::string& path, const char* what) : what_(what) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error(std::string(what) + ": cannot open " + path);
        buf_.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    }

    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf_[pos_++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf_[pos_]) |
                     (static_cast<uint16_t>(static_cast<uint8_t>(buf_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint64_t u64() {
        const uint64_t lo = u32();
        return lo | (static_cast<uint64_t>(u32()) << 32);
    }
    std::string str(size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename T>
    T scalar() {
        if constexpr (std::is_same_v<T, float>) {
            uint32_t bits = u32();
            float v;
            std::memcpy(&v, &bits, 4);
            return v;
        } else {
            uint64_t bits = u64();
            double v;
            std::memcpy(&v, &bits, 8);
            return v;
        }
    }
    bool at_end() const { return pos_ == buf_.size(); }

private:
    void need(size_t n) {
        if (pos_ + n > buf_.size())
            throw std::runtime_error(std::string(what_) + ": truncated file");
    }
    std::string buf_;
    size_t pos_ = 0;
    const char* what_;
};

void write_file(const std::string& path, const std::string& bytes, const char* what) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(std::string(what) + ": cannot open " + path + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error(std::string(what) + ": write failed for " + path);
}

template <typename T>
void encode_tensor_payload(std::string& out, const Tensor<T>& t) {
    for (int64_t i = 0; i < t.size(); ++i) put_scalar(out, t.data()[i]);
}

template <typename T>
std::vector<int> read_dims(Reader& r, int ndim, const char* what) {
    std::vector<int> dims;
    dims.reserve(static_cast<size_t>(ndim));
    for (int i = 0; i < ndim; ++i) {
        uint32_t e = r.u32();
        if (e == 0 || e > 1u << 30) throw std::runtime_error(std::string(what) + ": bad extent");
        dims.push_back(static_cast<int>(e));
    }
    return dims;
}

}  // namespace

template <typename T>
void write_tvmt(const Tensor<T>& t, const std::string& path) {
    std::string out;
    out += "TVMT";
    put_u8(out, 1);
    put_u8(out, static_cast<uint8_t>(scalar_kind_of<T>()));
    put_u8(out, static_cast<uint8_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
    encode_tensor_payload(out, t);
    write_file(path, out, "tvmt");
}

template <typename T>
Tensor<T> read_tvmt(const std::string& path) {
    Reader r(path, "tvmt");
    if (r.str(4) != "TVMT") throw std::runtime_error("tvmt: bad magic in " + path);
    if (r.u8() != 1) throw std::runtime_error("tvmt: unsupported version in " + path);
    const auto kind = static_cast<ScalarKind>(r.u8());
    if (kind != scalar_kind_of<T>())
        throw std::runtime_error("tvmt: scalar kind mismatch in " + path);
    const int ndim = r.u8();
    if (ndim < 1) throw std::runtime_error("tvmt: bad rank in " + path);
    std::vector<int> dims = read_dims<T>(r, ndim, "tvmt");
    int64_t n = 1;
    for (int d : dims) n *= d;
    std::vector<T> vals(static_cast<size_t>(n));
    for (auto& v : vals) v = r.template scalar<T>();
    if (!r.at_end()) throw std::runtime_error("tvmt: trailing bytes in " + path);
    return Tensor<T>::from(std::move(dims), std::move(vals));
}

ScalarKind probe_tvmt_kind(const std::string& path) {
    Reader r(path, "tvmt");
    if (r.str(4) != "TVMT") throw std::runtime_error("tvmt: bad magic in " + path);
    if (r.u8() != 1) throw std::runtime_error("tvmt: unsupported version in " + path);
    return static_cast<ScalarKind>(r.u8());
}

template <typename T>
void write_tvmw(const std::vector<std::pair<std::string, const Tensor<T>*>>& entries,
                const std::string& path) {
    std::string out;
    out += "TVMW";
    put_u8(out, 1);
    put_u32(out, static_cast<uint32_t>(entries.size()));
    for (const auto& [name, t] : entries) {
        if (name.size() > 0xffff) throw std::invalid_argument("tvmw: entry name too long");
        put_u16(out, static_cast<uint16_t>(name.size()));
        out += name;
        put_u8(out, static_cast<uint8_t>(scalar_kind_of<T>()));
        put_u8(out, static_cast<uint8_t>(t->ndim()));
        for (int i = 0; i < t->ndim(); ++i) put_u32(out, static_cast<uint32_t>(t->dim(i)));
        encode_tensor_payload(out, *t);
    }
    write_file(path, out, "tvmw");
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> read_tvmw(const std::string& path) {
    Reader r(path, "tvmw");
    if (r.str(4) != "TVMW") throw std::runtime_error("tvmw: bad magic in " + path);
    if (r.u8() != 1) throw std::runtime_error("tvmw: unsupported version in " + path);
    const uint32_t count = r.u32();
    std::vector<std::pair<std::string, Tensor<T>>> entries;
    entries.reserve(count);
    for (uint32_t e = 0; e < count; ++e) {
        const uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        const auto kind = static_cast<ScalarKind>(r.u8());
        if (kind != scalar_kind_of<T>())
            throw std::runtime_error("tvmw: scalar kind mismatch for entry '" + name + "'");
        const int ndim = r.u8();
        std::vector<int> dims = read_dims<T>(r, ndim, "tvmw");
        int64_t n = 1;
        for (int d : dims) n *= d;
        std::vector<T> vals(static_cast<size_t>(n));
        for (auto& v : vals) v = r.template scalar<T>();
        entries.emplace_back(std::move(name), Tensor<T>::from(std::move(dims), std::move(vals)));
    }
    if (!r.at_end()) throw std::runtime_error("tvmw: trailing bytes in " + path);
    return entries;
}

template void write_tvmt(const Tensor<float>&, const std::string&);
template void write_tvmt(const Tensor<double>&, const std::string&);
template Tensor<float> read_tvmt(const std::string&);
template Tensor<double> read_tvmt(const std::string&);
template void write_tvmw(const std::vector<std::pair<std::string, const Tensor<float>*>>&,
                         const std::string&);
template void write_tvmw(const std::vector<std::pair<std::string, const Tensor<double>*>>&,
                         const std::string&);
template std::vector<std::pair<std::string, Tensor<float>>> read_tvmw(const std::string&);
template std::vector<std::pair<std::string, Tensor<double>>> read_tvmw(const std::string&);

}  // namespace tinyvim
