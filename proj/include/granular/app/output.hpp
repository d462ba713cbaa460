#pragma once

// Record writers.  Every number is written as the shortest decimal string
// that reads back to the same double.
//
//   lagrangian: t,i,x,u,gamma
//   eulerian:   t,x,rho,u,gamma,rho_star     (rho_star = 1 for a uniform cap)
//
// The JSON-lines form writes one object per record with the same keys.

#include <array>
#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "granular/app/config.hpp"
#include "granular/dynamics.hpp"
#include "granular/error.hpp"
#include "granular/eulerian.hpp"

namespace granular::app {

inline void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

inline void append_number(std::string& out, std::size_t v) {
  std::array<char, 24> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_number(s, v);
  return s;
}

class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, Format format, std::vector<std::string> columns)
      : out_(path, std::ios::binary | std::ios::trunc), format_(format), columns_(std::move(columns)) {
    if (!out_) throw Error("cannot open output file " + path.string());
    if (format_ == Format::csv) {
      std::string header;
      for (std::size_t k = 0; k < columns_.size(); ++k) {
        if (k) header += ',';
        header += columns_[k];
      }
      out_ << header << '\n';
    }
  }

  /// One value per column, in column order.
  template <typename... Values>
  void write(const Values&... values) {
    static_assert(sizeof...(Values) > 0);
    line_.clear();
    if (format_ == Format::json_lines) line_ += '{';
    std::size_t k = 0;
    (emit(k++, values), ...);
    if (format_ == Format::json_lines) line_ += '}';
    line_ += '\n';
    out_ << line_;
  }

  void flush() { out_.flush(); }

 private:
  template <typename T>
  void emit(std::size_t k, const T& v) {
    if (k > 0) line_ += ',';
    if (format_ == Format::json_lines) {
      line_ += '"';
      line_ += columns_[k];
      line_ += "\":";
    }
    append_number(line_, v);
  }

  std::ofstream out_;
  Format format_;
  std::vector<std::string> columns_;
  std::string line_;
};

inline std::string extension(Format f) { return f == Format::csv ? ".csv" : ".jsonl"; }

inline void write_lagrangian(RecordWriter& w, const SimState& s) {
  for (std::size_t i = 0; i < s.x.size(); ++i) w.write(s.t, i, s.x[i], s.u[i], s.gamma[i]);
}

inline void write_eulerian(RecordWriter& w, const EulerianField& field) {
  for (const auto& c : field.samples) w.write(field.t, c.x, c.rho, c.u, c.gamma, c.rho_star.value_or(1.0));
}

}  // namespace granular::app
