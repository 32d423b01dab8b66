#include "davsn/array_io.h"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace davsn::io {

namespace {

constexpr char kArrayMagic[4] = {'D', 'V', 'S', 'A'};
constexpr char kContainerMagic[4] = {'D', 'V', 'S', 'C'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("truncated read in " + what);
    return v;
}

void write_header(std::ostream& os, DType dt, const std::vector<int>& dims) {
    os.write(kArrayMagic, 4);
    put<uint16_t>(os, kFormatVersion);
    put<uint8_t>(os, static_cast<uint8_t>(dt));
    put<uint8_t>(os, static_cast<uint8_t>(dims.size()));
    for (int d : dims) put<int32_t>(os, d);
}

std::vector<int> read_header(std::istream& is, DType expect, const std::string& what) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kArrayMagic, 4) != 0)
        throw DataError("bad array magic in " + what);
    uint16_t ver = get<uint16_t>(is, what);
    if (ver != kFormatVersion)
        throw DataError("unsupported array format version " + std::to_string(ver) + " in " + what);
    uint8_t dt = get<uint8_t>(is, what);
    if (dt != static_cast<uint8_t>(expect))
        throw DataError("unexpected dtype in " + what);
    uint8_t nd = get<uint8_t>(is, what);
    std::vector<int> dims(nd);
    for (auto& d : dims) d = get<int32_t>(is, what);
    return dims;
}

template <typename T>
void write_payload(std::ostream& os, const T* p, int64_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_payload(std::istream& is, T* p, int64_t n, const std::string& what) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw DataError("truncated payload in " + what);
}

} // namespace

void write_array_f64(std::ostream& os, const Tensor& t) {
    write_header(os, DType::F64, t.dims());
    write_payload(os, t.data(), t.size());
}

void write_array_f32(std::ostream& os, const std::vector<float>& v, const std::vector<int>& dims) {
    if (Tensor::count(dims) != static_cast<int64_t>(v.size()))
        throw DataError("f32 array dims do not match payload size");
    write_header(os, DType::F32, dims);
    write_payload(os, v.data(), static_cast<int64_t>(v.size()));
}

void write_array_u8(std::ostream& os, const std::vector<uint8_t>& v, const std::vector<int>& dims) {
    if (Tensor::count(dims) != static_cast<int64_t>(v.size()))
        throw DataError("u8 array dims do not match payload size");
    write_header(os, DType::U8, dims);
    write_payload(os, v.data(), static_cast<int64_t>(v.size()));
}

void write_array_bytes(std::ostream& os, const std::string& bytes) {
    write_header(os, DType::Bytes, {static_cast<int>(bytes.size())});
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_array_f64(std::istream& is, const std::string& what) {
    auto dims = read_header(is, DType::F64, what);
    Tensor t(dims);
    read_payload(is, t.data(), t.size(), what);
    return t;
}

std::vector<float> read_array_f32(std::istream& is, std::vector<int>& dims, const std::string& what) {
    dims = read_header(is, DType::F32, what);
    std::vector<float> v(static_cast<size_t>(Tensor::count(dims)));
    read_payload(is, v.data(), static_cast<int64_t>(v.size()), what);
    return v;
}

std::vector<uint8_t> read_array_u8(std::istream& is, std::vector<int>& dims, const std::string& what) {
    dims = read_header(is, DType::U8, what);
    std::vector<uint8_t> v(static_cast<size_t>(Tensor::count(dims)));
    read_payload(is, v.data(), static_cast<int64_t>(v.size()), what);
    return v;
}

std::string read_array_bytes(std::istream& is, const std::string& what) {
    auto dims = read_header(is, DType::Bytes, what);
    std::string s(static_cast<size_t>(dims.at(0)), '\0');
    is.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!is) throw DataError("truncated payload in " + what);
    return s;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for reading: " + path);
    return f;
}

} // namespace

void save_f32_file(const std::string& path, const std::vector<float>& v, const std::vector<int>& dims) {
    auto f = open_out(path);
    write_array_f32(f, v, dims);
    if (!f) throw DataError("write failed: " + path);
}

std::vector<float> load_f32_file(const std::string& path, std::vector<int>& dims) {
    auto f = open_in(path);
    return read_array_f32(f, dims, path);
}

void save_u8_file(const std::string& path, const std::vector<uint8_t>& v, const std::vector<int>& dims) {
    auto f = open_out(path);
    write_array_u8(f, v, dims);
    if (!f) throw DataError("write failed: " + path);
}

std::vector<uint8_t> load_u8_file(const std::string& path, std::vector<int>& dims) {
    auto f = open_in(path);
    return read_array_u8(f, dims, path);
}

void write_container(std::ostream& os, const std::vector<NamedRecord>& records) {
    os.write(kContainerMagic, 4);
    put<uint16_t>(os, kFormatVersion);
    put<uint32_t>(os, static_cast<uint32_t>(records.size()));
    for (const auto& r : records) {
        put<uint16_t>(os, static_cast<uint16_t>(r.name.size()));
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        switch (r.dtype) {
            case DType::F64: write_array_f64(os, r.tensor); break;
            case DType::Bytes: write_array_bytes(os, r.bytes); break;
            case DType::I64: {
                write_header(os, DType::I64, {static_cast<int>(r.ints.size())});
                write_payload(os, r.ints.data(), static_cast<int64_t>(r.ints.size()));
                break;
            }
            default: throw DataError("unsupported container record dtype");
        }
    }
}

std::vector<NamedRecord> read_container(std::istream& is, const std::string& what) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kContainerMagic, 4) != 0)
        throw DataError("bad container magic in " + what);
    uint16_t ver = get<uint16_t>(is, what);
    if (ver != kFormatVersion)
        throw DataError("unsupported container version " + std::to_string(ver) + " in " + what);
    uint32_t n = get<uint32_t>(is, what);
    std::vector<NamedRecord> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        NamedRecord r;
        uint16_t len = get<uint16_t>(is, what);
        r.name.resize(len);
        is.read(r.name.data(), len);
        if (!is) throw DataError("truncated record name in " + what);
        // Peek dtype by re-reading the array header; dispatch on it.
        auto pos = is.tellg();
        char amagic[4];
        is.read(amagic, 4);
        get<uint16_t>(is, what);
        uint8_t dt_code = get<uint8_t>(is, what);
        is.seekg(pos);
        switch (static_cast<DType>(dt_code)) {
            case DType::F64:
                r.dtype = DType::F64;
                r.tensor = read_array_f64(is, what + ":" + r.name);
                break;
            case DType::Bytes:
                r.dtype = DType::Bytes;
                r.bytes = read_array_bytes(is, what + ":" + r.name);
                break;
            case DType::I64: {
                r.dtype = DType::I64;
                auto dims = read_header(is, DType::I64, what + ":" + r.name);
                r.ints.resize(static_cast<size_t>(dims.at(0)));
                read_payload(is, r.ints.data(), static_cast<int64_t>(r.ints.size()), what);
                break;
            }
            default:
                throw DataError("unknown record dtype in " + what + ":" + r.name);
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace davsn::io
