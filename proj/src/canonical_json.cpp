#include "scansum/canonical_json.hpp"

#include <cmath>
#include <cstdio>

namespace scansum {

namespace {

void write_value(const nlohmann::json& v, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(it.key()).dump() + ": ";
        write_value(it.value(), out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write_value(v[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      double d = v.get<double>();
      if (d == 0.0) d = 0.0;  // no "-0.000000"
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f", d);
      if (std::string_view(buf) == "-0.000000") {
        out += "0.000000";
      } else {
        out += buf;
      }
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

double round6(double value) { return std::round(value * 1e6) / 1e6; }

std::string canonical_dump(const nlohmann::json& doc) {
  std::string out;
  write_value(doc, out, 0);
  out += "\n";
  return out;
}

}  // namespace scansum
