#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "xdom/error.hpp"
#include "xdom/tensor.hpp"

namespace xdom::ckpt {

// Single-file snapshot container:
//
//   bytes 0..7   magic "XDOMCKPT"
//   bytes 8..11  format version (u32, little-endian)
//   bytes 12..19 header length in bytes (u64, little-endian)
//   header       UTF-8 JSON: {"meta": {...}, "tensors": [{name,dtype,shape,
//                offset,bytes}, ...]}
//   payload      raw little-endian tensor data, back to back
//
// Tensor bytes are copied verbatim, so round-trips are bit-exact.

inline constexpr char kMagic[8] = {'X', 'D', 'O', 'M', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kVersion = 1;

template <class T>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() { return "f32"; }
template <>
inline const char* dtype_name<double>() { return "f64"; }
template <>
inline const char* dtype_name<int64_t>() { return "i64"; }
template <>
inline const char* dtype_name<uint8_t>() { return "u8"; }

class Writer {
 public:
  explicit Writer(nlohmann::json meta = nlohmann::json::object());

  nlohmann::json& meta() { return meta_; }

  void add_raw(const std::string& name, const char* dtype, std::vector<int64_t> shape,
               const void* data, uint64_t bytes);

  template <class T>
  void add(const std::string& name, const Tensor<T>& t) {
    add_raw(name, dtype_name<T>(), t.shape(), t.data(),
            static_cast<uint64_t>(t.numel()) * sizeof(T));
  }

  // Serializes to disk; throws IngestionError on any I/O failure.
  void write(const std::string& path) const;

 private:
  nlohmann::json meta_;
  nlohmann::json tensors_ = nlohmann::json::array();
  std::vector<std::string> names_;  // duplicate-name guard
  std::string payload_;
};

class Reader {
 public:
  explicit Reader(const std::string& path);

  const nlohmann::json& meta() const { return meta_; }
  std::vector<std::string> names() const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  template <class T>
  Tensor<T> tensor(const std::string& name) const {
    const Entry& e = entry(name);
    if (e.dtype != dtype_name<T>()) {
      throw IngestionError(msg("tensor '", name, "' has dtype ", e.dtype, ", requested ",
                               dtype_name<T>()));
    }
    Tensor<T> t(e.shape);
    if (static_cast<uint64_t>(t.numel()) * sizeof(T) != e.bytes) {
      throw IngestionError(msg("tensor '", name, "' byte count does not match its shape"));
    }
    std::memcpy(t.data(), payload_.data() + e.offset, e.bytes);
    return t;
  }

 private:
  struct Entry {
    std::string dtype;
    std::vector<int64_t> shape;
    uint64_t offset = 0, bytes = 0;
  };
  const Entry& entry(const std::string& name) const;

  nlohmann::json meta_;
  std::map<std::string, Entry> index_;
  std::string payload_;
};

}  // namespace xdom::ckpt
