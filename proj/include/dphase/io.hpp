#pragma once

// Plain-text field files and CSV helpers.
//
//   DPFIELD v1
//   <dim> <nx> [<ny>]
//   <lx> [<ly>] [origin <ox> [<oy>]]
//   one value per line, row-major node order, 17 significant digits

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dphase/errors.hpp"
#include "dphase/mesh.hpp"

namespace dphase {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_field(const NodalField& field, std::ostream& os) {
  const Grid& g = field.grid();
  os << "DPFIELD v1\n";
  os << g.dim() << ' ' << g.nx();
  if (g.dim() == 2) os << ' ' << g.ny();
  os << '\n' << format_double(g.lx());
  if (g.dim() == 2) os << ' ' << format_double(g.ly());
  if (g.ox() != 0.0 || g.oy() != 0.0) {
    os << " origin " << format_double(g.ox());
    if (g.dim() == 2) os << ' ' << format_double(g.oy());
  }
  os << '\n';
  for (double v : field.values()) os << format_double(v) << '\n';
}

namespace detail {

inline bool next_content_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

}  // namespace detail

inline NodalField read_field(std::istream& is) {
  std::string line;
  if (!detail::next_content_line(is, line) || line.rfind("DPFIELD v1", 0) != 0) {
    throw Error(ErrorCode::MalformedHeader, "expected 'DPFIELD v1' on line 1");
  }
  if (!detail::next_content_line(is, line)) throw Error(ErrorCode::MalformedHeader, "missing dimension line");
  std::istringstream dims(line);
  int dim = 0, nx = 0, ny = 1;
  dims >> dim >> nx;
  if (dim == 2) dims >> ny;
  if (!dims || (dim != 1 && dim != 2)) throw Error(ErrorCode::MalformedHeader, "bad dimension line '" + line + "'");

  if (!detail::next_content_line(is, line)) throw Error(ErrorCode::MalformedHeader, "missing extents line");
  std::istringstream ext(line);
  double lx = 0.0, ly = 0.0, ox = 0.0, oy = 0.0;
  ext >> lx;
  if (dim == 2) ext >> ly;
  if (!ext) throw Error(ErrorCode::MalformedHeader, "bad extents line '" + line + "'");
  std::string tag;
  if (ext >> tag) {
    if (tag != "origin") throw Error(ErrorCode::MalformedHeader, "unexpected token '" + tag + "'");
    ext >> ox;
    if (dim == 2) ext >> oy;
    if (!ext) throw Error(ErrorCode::MalformedHeader, "bad origin on extents line");
  }

  GridPtr grid;
  try {
    grid = dim == 1 ? Grid::line(nx, lx, ox) : Grid::rectangle(nx, ny, lx, ly, ox, oy);
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedHeader, e.what());
  }

  std::vector<double> values;
  values.reserve(grid->node_count());
  while (detail::next_content_line(is, line)) {
    const char* begin = line.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw Error(ErrorCode::MalformedHeader, "unparsable value '" + line + "'");
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite value '" + line + "'");
    values.push_back(v);
  }
  if (static_cast<int>(values.size()) != grid->node_count()) {
    throw Error(ErrorCode::CountMismatch, "expected " + std::to_string(grid->node_count()) + " values, found " +
                                              std::to_string(values.size()));
  }
  return NodalField(grid, std::move(values));
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + tmp.string());
    os << content;
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

inline void write_field(const NodalField& field, const std::filesystem::path& path) {
  std::ostringstream os;
  write_field(field, os);
  write_file_atomic(path, os.str());
}

inline NodalField read_field(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_field(is);
}

/// CSV text: optional leading comment line, header row, one row per line.
struct CsvTable {
  std::string comment;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream os;
    if (!comment.empty()) os << "# " << comment << '\n';
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
      for (size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    }
    return os.str();
  }

  static CsvTable parse(std::istream& is) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    auto split = [](const std::string& s) {
      std::vector<std::string> out;
      std::string cell;
      std::istringstream ss(s);
      while (std::getline(ss, cell, ',')) out.push_back(cell);
      return out;
    };
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        if (!have_header && t.comment.empty()) t.comment = line.size() > 2 ? line.substr(2) : "";
        continue;
      }
      if (!have_header) {
        t.header = split(line);
        have_header = true;
      } else {
        auto r = split(line);
        if (r.size() != t.header.size()) {
          throw Error(ErrorCode::CountMismatch, "CSV row has " + std::to_string(r.size()) + " cells, header has " +
                                                    std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(r));
      }
    }
    if (!have_header) throw Error(ErrorCode::MalformedHeader, "CSV without header row");
    return t;
  }
};

}  // namespace dphase
