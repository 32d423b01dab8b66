#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "davsn/tensor.h"

namespace davsn::io {

// Header-described binary arrays, little-endian, row-major. One array per
// dataset file; checkpoints concatenate named records into a container.
//
// Array header: magic "DVSA", u16 version, u8 dtype, u8 ndims, i32 dims[ndims].
// Container:    magic "DVSC", u16 version, u32 record count, then records of
//               (u16 name_len, name bytes, array).
//
// dtype codes: 0 = f64, 1 = f32, 2 = u8, 3 = i64, 4 = raw bytes (1-D).

enum class DType : uint8_t { F64 = 0, F32 = 1, U8 = 2, I64 = 3, Bytes = 4 };

inline constexpr uint16_t kFormatVersion = 1;

void write_array_f64(std::ostream& os, const Tensor& t);
void write_array_f32(std::ostream& os, const std::vector<float>& v, const std::vector<int>& dims);
void write_array_u8(std::ostream& os, const std::vector<uint8_t>& v, const std::vector<int>& dims);
void write_array_bytes(std::ostream& os, const std::string& bytes);

// Readers validate magic/version/dtype and throw DataError naming `what`.
Tensor read_array_f64(std::istream& is, const std::string& what);
std::vector<float> read_array_f32(std::istream& is, std::vector<int>& dims, const std::string& what);
std::vector<uint8_t> read_array_u8(std::istream& is, std::vector<int>& dims, const std::string& what);
std::string read_array_bytes(std::istream& is, const std::string& what);

// Whole-file helpers.
void save_f32_file(const std::string& path, const std::vector<float>& v, const std::vector<int>& dims);
std::vector<float> load_f32_file(const std::string& path, std::vector<int>& dims);
void save_u8_file(const std::string& path, const std::vector<uint8_t>& v, const std::vector<int>& dims);
std::vector<uint8_t> load_u8_file(const std::string& path, std::vector<int>& dims);

// Named-tensor container (checkpoints).
struct NamedRecord {
    std::string name;
    DType dtype = DType::F64;
    Tensor tensor;      // for F64
    std::string bytes;  // for Bytes
    std::vector<int64_t> ints;  // for I64
};

void write_container(std::ostream& os, const std::vector<NamedRecord>& records);
std::vector<NamedRecord> read_container(std::istream& is, const std::string& what);

} // namespace davsn::io
