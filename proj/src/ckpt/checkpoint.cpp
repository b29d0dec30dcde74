#include "xdom/ckpt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as raw little-endian bytes");

namespace xdom::ckpt {

Writer::Writer(nlohmann::json meta) : meta_(std::move(meta)) {}

void Writer::add_raw(const std::string& name, const char* dtype, std::vector<int64_t> shape,
                     const void* data, uint64_t bytes) {
  for (const auto& n : names_) {
    if (n == name) throw IngestionError(msg("duplicate tensor name '", name, "'"));
  }
  names_.push_back(name);
  nlohmann::json e;
  e["name"] = name;
  e["dtype"] = dtype;
  e["shape"] = shape;
  e["offset"] = payload_.size();
  e["bytes"] = bytes;
  tensors_.push_back(std::move(e));
  payload_.append(static_cast<const char*>(data), bytes);
}

void Writer::write(const std::string& path) const {
  nlohmann::json header;
  header["meta"] = meta_;
  header["tensors"] = tensors_;
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError(msg("cannot open '", path, "' for writing"));
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  out.write(payload_.data(), static_cast<std::streamsize>(payload_.size()));
  out.flush();
  if (!out) throw IngestionError(msg("failed while writing '", path, "'"));
}

Reader::Reader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(msg("cannot open '", path, "'"));
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IngestionError(msg("failed while reading '", path, "'"));

  const size_t preamble = sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t);
  if (blob.size() < preamble) throw IngestionError(msg("'", path, "' is too short"));
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IngestionError(msg("'", path, "' is not a checkpoint file"));
  }
  uint32_t version = 0;
  std::memcpy(&version, blob.data() + sizeof(kMagic), sizeof(version));
  if (version != kVersion) {
    throw IngestionError(msg("'", path, "' uses checkpoint format version ", version,
                             ", expected ", kVersion));
  }
  uint64_t hlen = 0;
  std::memcpy(&hlen, blob.data() + sizeof(kMagic) + sizeof(uint32_t), sizeof(hlen));
  if (preamble + hlen > blob.size()) {
    throw IngestionError(msg("'", path, "' header is truncated"));
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.begin() + static_cast<long>(preamble),
                                   blob.begin() + static_cast<long>(preamble + hlen));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(msg("'", path, "' has a malformed header: ", e.what()));
  }

  payload_ = blob.substr(preamble + hlen);
  try {
    meta_ = header.at("meta");
    for (const auto& e : header.at("tensors")) {
      Entry entry;
      entry.dtype = e.at("dtype").get<std::string>();
      entry.shape = e.at("shape").get<std::vector<int64_t>>();
      entry.offset = e.at("offset").get<uint64_t>();
      entry.bytes = e.at("bytes").get<uint64_t>();
      if (entry.offset + entry.bytes > payload_.size()) {
        throw IngestionError(msg("'", path, "' payload is truncated for tensor '",
                                 e.at("name").get<std::string>(), "'"));
      }
      index_.emplace(e.at("name").get<std::string>(), std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(msg("'", path, "' has a malformed header: ", e.what()));
  }
}

std::vector<std::string> Reader::names() const {
  std::vector<std::string> out;
  out.reserve(index_.size());
  for (const auto& [k, v] : index_) out.push_back(k);
  return out;
}

const Reader::Entry& Reader::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IngestionError(msg("checkpoint has no tensor '", name, "'"));
  return it->second;
}

}  // namespace xdom::ckpt
