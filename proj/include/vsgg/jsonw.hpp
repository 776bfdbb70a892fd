#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace vsgg {

// Minimal JSON writer with a pinned key order and "%.9g" floats, used for
// every artifact that must be byte-identical across reruns.
class JsonWriter {
 public:
  std::string take() { return std::move(out_); }
  const std::string& str() const { return out_; }

  JsonWriter& begin_object() { return raw("{"); }
  JsonWriter& end_object() { return raw("}"); }
  JsonWriter& begin_array() { return raw("["); }
  JsonWriter& end_array() { return raw("]"); }
  JsonWriter& comma() { return raw(","); }

  JsonWriter& key(const char* k) {
    string_value(k);
    return raw(":");
  }

  JsonWriter& value(const std::string& s) { return string_value(s.c_str()); }
  JsonWriter& value(const char* s) { return string_value(s); }
  JsonWriter& value(bool b) { return raw(b ? "true" : "false"); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(int64_t v) { return raw(std::to_string(v)); }
  JsonWriter& value(uint64_t v) { return raw(std::to_string(v)); }

  JsonWriter& value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return raw(buf);
  }

  template <typename T>
  JsonWriter& array(const std::vector<T>& vs) {
    begin_array();
    for (size_t i = 0; i < vs.size(); ++i) {
      if (i) comma();
      value(vs[i]);
    }
    return end_array();
  }

  JsonWriter& raw(const std::string& s) {
    out_ += s;
    return *this;
  }

 private:
  JsonWriter& string_value(const char* s) {
    out_ += '"';
    for (const char* p = s; *p; ++p) {
      switch (*p) {
        case '"': out_ += "\\\""; break;
        case '\\': out_ += "\\\\"; break;
        case '\n': out_ += "\\n"; break;
        case '\t': out_ += "\\t"; break;
        case '\r': out_ += "\\r"; break;
        default: out_ += *p;
      }
    }
    out_ += '"';
    return *this;
  }

  std::string out_;
};

}  // namespace vsgg
