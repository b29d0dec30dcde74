#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace xdom {

// Error taxonomy. Every failure surfaced by the library carries a category
// keyword so the CLI can emit single-line machine-parseable diagnostics of
// the form "error: <category>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }
  std::string formatted() const { return "error: " + category_ + ": " + what(); }

 private:
  std::string category_;
};

#define XDOM_DEFINE_ERROR(Name, keyword)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& m) : Error(keyword, m) {}    \
  }

XDOM_DEFINE_ERROR(DimensionError, "dimension");   // mismatched vector/matrix dims
XDOM_DEFINE_ERROR(DomainError, "domain");         // argument outside mathematical domain
XDOM_DEFINE_ERROR(ShapeError, "shape");           // tensor shape contract violated
XDOM_DEFINE_ERROR(ConfigError, "config");         // bad configuration key/value
XDOM_DEFINE_ERROR(IngestionError, "ingestion");   // unreadable/corrupt input files
XDOM_DEFINE_ERROR(NumericError, "numeric");       // non-finite values where finite required
XDOM_DEFINE_ERROR(AssemblyError, "assembly");     // inconsistent loss-report assembly

#undef XDOM_DEFINE_ERROR

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

// Small helper to build error messages without pulling in a formatting lib.
template <class... Parts>
std::string msg(const Parts&... parts) {
  std::ostringstream os;
  detail::format_into(os, parts...);
  return os.str();
}

}  // namespace xdom
