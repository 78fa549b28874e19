#include "rpsc/panel.hpp"

#include "rpsc/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

namespace rpsc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> to_number(const std::string& cell) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

double parse_number(const std::string& cell, std::size_t line, std::size_t column) {
  auto v = to_number(cell);
  if (!v) {
    std::ostringstream msg;
    msg << "line " << line << ", column " << column << ": cannot parse '" << cell
        << "' as a number";
    throw ValidationError(msg.str());
  }
  return *v;
}

struct Row {
  std::size_t line;
  std::vector<std::string> cells;
};

std::vector<Row> read_rows(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    for (auto& c : cells) c = trim(std::move(c));
    rows.push_back({number, std::move(cells)});
  }
  return rows;
}

Panel read_wide(std::istream& in) {
  auto rows = read_rows(in);
  if (rows.empty()) throw ValidationError("empty panel file");

  const auto& header = rows.front();
  if (header.cells.size() < 2) {
    throw ValidationError("line " + std::to_string(header.line) +
                          ": header needs a unit column and at least one time label");
  }
  Panel p;
  for (std::size_t c = 1; c < header.cells.size(); ++c) {
    p.time_labels.push_back(parse_number(header.cells[c], header.line, c + 1));
  }
  const std::size_t T = p.time_labels.size();
  const std::size_t M = rows.size() - 1;
  p.values = Matrix::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(T));
  p.mask = Mask::Constant(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(T), false);

  for (std::size_t r = 0; r < M; ++r) {
    const auto& row = rows[r + 1];
    if (row.cells.size() != T + 1) {
      std::ostringstream msg;
      msg << "line " << row.line << ": ragged row with " << row.cells.size()
          << " fields, expected " << T + 1;
      throw ValidationError(msg.str());
    }
    p.unit_labels.push_back(row.cells[0]);
    for (std::size_t c = 0; c < T; ++c) {
      const auto& cell = row.cells[c + 1];
      if (is_missing(cell)) continue;
      const auto i = static_cast<Eigen::Index>(r);
      const auto j = static_cast<Eigen::Index>(c);
      p.values(i, j) = parse_number(cell, row.line, c + 2);
      p.mask(i, j) = true;
    }
  }
  return p;
}

Panel read_long(std::istream& in) {
  auto rows = read_rows(in);
  if (rows.empty()) throw ValidationError("empty panel file");

  std::size_t start = 0;
  if (rows.front().cells.size() == 3 && !to_number(rows.front().cells[1])) start = 1;

  std::vector<std::string> units;
  std::map<std::string, std::size_t> unit_index;
  std::set<double> times;
  struct Entry {
    std::size_t unit;
    double time;
    std::optional<double> value;
  };
  std::vector<Entry> entries;
  std::set<std::pair<std::size_t, double>> seen;

  for (std::size_t r = start; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.cells.size() != 3) {
      std::ostringstream msg;
      msg << "line " << row.line << ": ragged row with " << row.cells.size()
          << " fields, expected 3 (unit,time,value)";
      throw ValidationError(msg.str());
    }
    const auto& name = row.cells[0];
    auto [it, inserted] = unit_index.try_emplace(name, units.size());
    if (inserted) units.push_back(name);
    const double time = parse_number(row.cells[1], row.line, 2);
    if (!seen.emplace(it->second, time).second) {
      std::ostringstream msg;
      msg << "line " << row.line << ": duplicate entry for unit '" << name << "' at time "
          << row.cells[1];
      throw ValidationError(msg.str());
    }
    times.insert(time);
    std::optional<double> value;
    if (!is_missing(row.cells[2])) value = parse_number(row.cells[2], row.line, 3);
    entries.push_back({it->second, time, value});
  }

  Panel p;
  p.unit_labels = units;
  p.time_labels.assign(times.begin(), times.end());
  const auto M = static_cast<Eigen::Index>(units.size());
  const auto T = static_cast<Eigen::Index>(times.size());
  p.values = Matrix::Zero(M, T);
  p.mask = Mask::Constant(M, T, false);
  for (const auto& e : entries) {
    if (!e.value) continue;
    const auto col = std::lower_bound(p.time_labels.begin(), p.time_labels.end(), e.time) -
                     p.time_labels.begin();
    p.values(static_cast<Eigen::Index>(e.unit), col) = *e.value;
    p.mask(static_cast<Eigen::Index>(e.unit), col) = true;
  }
  return p;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

bool Panel::operator==(const Panel& other) const {
  return values.rows() == other.values.rows() && values.cols() == other.values.cols() &&
         mask.rows() == other.mask.rows() && mask.cols() == other.mask.cols() &&
         (mask == other.mask).all() &&
         (values.array() == other.values.array() || !mask).all() &&
         unit_labels == other.unit_labels && time_labels == other.time_labels &&
         treated == other.treated && t0 == other.t0;
}

Layout parse_layout(const std::string& name) {
  if (name == "wide") return Layout::Wide;
  if (name == "long") return Layout::Long;
  throw ValidationError("unknown layout '" + name + "' (expected wide or long)");
}

Panel read_panel(std::istream& in, Layout layout) {
  return layout == Layout::Wide ? read_wide(in) : read_long(in);
}

Panel load_panel(const std::filesystem::path& path, Layout layout) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open panel file " + path.string());
  try {
    return read_panel(in, layout);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_panel(std::ostream& out, const Panel& panel, Layout layout) {
  const auto M = panel.values.rows();
  const auto T = panel.values.cols();
  if (layout == Layout::Wide) {
    out << "unit";
    for (double t : panel.time_labels) out << ',' << format_number(t);
    out << '\n';
    for (Eigen::Index i = 0; i < M; ++i) {
      out << quote_if_needed(panel.unit_labels[static_cast<std::size_t>(i)]);
      for (Eigen::Index t = 0; t < T; ++t) {
        out << ',';
        if (panel.mask(i, t)) out << format_number(panel.values(i, t));
      }
      out << '\n';
    }
  } else {
    out << "unit,time,value\n";
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index t = 0; t < T; ++t) {
        out << quote_if_needed(panel.unit_labels[static_cast<std::size_t>(i)]) << ','
            << format_number(panel.time_labels[static_cast<std::size_t>(t)]) << ',';
        out << (panel.mask(i, t) ? format_number(panel.values(i, t)) : "NA") << '\n';
      }
    }
  }
}

ValidationReport validate(const Panel& panel) {
  ValidationReport rep;
  auto fail = [&rep](std::string msg) {
    rep.ok = false;
    rep.violations.push_back(std::move(msg));
  };

  const auto M = panel.values.rows();
  const auto T = panel.values.cols();
  if (panel.mask.rows() != M || panel.mask.cols() != T) {
    fail("mask shape differs from values shape");
    return rep;
  }
  if (M < 2) fail("panel needs at least 2 units");
  if (T < 2) fail("panel needs at least 2 periods");
  if (panel.unit_labels.size() != static_cast<std::size_t>(M)) fail("unit label count differs from rows");
  {
    std::vector<std::string> sorted = panel.unit_labels;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) fail("duplicate unit label '" + *dup + "'");
  }
  if (panel.time_labels.size() != static_cast<std::size_t>(T)) {
    fail("time label count differs from columns");
    return rep;
  }
  for (std::size_t t = 1; t < panel.time_labels.size(); ++t) {
    if (!(panel.time_labels[t] > panel.time_labels[t - 1])) {
      fail("time labels not strictly increasing at position " + std::to_string(t));
      break;
    }
  }
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      if (panel.mask(i, t) && !std::isfinite(panel.values(i, t))) {
        fail("non-finite observed value in row " + std::to_string(i));
        break;
      }
    }
  }

  rep.missing_per_unit.resize(static_cast<std::size_t>(M));
  for (Eigen::Index i = 0; i < M; ++i) {
    rep.missing_per_unit[static_cast<std::size_t>(i)] =
        static_cast<std::size_t>((!panel.mask.row(i)).count());
  }

  if (!panel.treated) {
    fail("treated unit not set");
  } else if (*panel.treated >= static_cast<std::size_t>(M)) {
    fail("treated index out of range");
  }

  if (!panel.t0) {
    fail("intervention index not set");
  } else {
    const auto t0 = *panel.t0;
    if (t0 < 1) fail("no pre-intervention period");
    if (t0 >= static_cast<std::size_t>(T)) fail("no post-intervention period");
    rep.pre_periods = std::min<std::size_t>(t0, static_cast<std::size_t>(T));
    rep.post_periods = static_cast<std::size_t>(T) - rep.pre_periods;
    if (t0 >= 1 && t0 <= static_cast<std::size_t>(T) && panel.unit_labels.size() == static_cast<std::size_t>(M)) {
      for (Eigen::Index i = 0; i < M; ++i) {
        const auto observed = panel.mask.row(i).head(static_cast<Eigen::Index>(t0)).count();
        if (observed < 2) {
          fail("unit '" + panel.unit_labels[static_cast<std::size_t>(i)] + "' has " +
               std::to_string(observed) + " observed pre-intervention entries (need 2)");
        }
      }
    }
  }
  return rep;
}

void require_valid(const Panel& panel) {
  const auto rep = validate(panel);
  if (rep.ok) return;
  std::string msg = "invalid panel:";
  for (const auto& v : rep.violations) msg += "\n  - " + v;
  throw ValidationError(msg);
}

std::size_t find_unit(const Panel& panel, const std::string& label) {
  const auto it = std::find(panel.unit_labels.begin(), panel.unit_labels.end(), label);
  if (it == panel.unit_labels.end()) throw ValidationError("unknown unit '" + label + "'");
  return static_cast<std::size_t>(it - panel.unit_labels.begin());
}

std::size_t resolve_t0(const Panel& panel, double label) {
  const auto& tl = panel.time_labels;
  for (std::size_t t = 0; t < tl.size(); ++t) {
    if (std::abs(tl[t] - label) <= 1e-9 * std::max(1.0, std::abs(label))) return t + 1;
  }
  throw ValidationError("intervention time " + format_number(label) + " is not a time label");
}

bool has_regular_spacing(const std::vector<double>& times, double rel_tol) {
  if (times.size() < 3) return true;
  const double step = times[1] - times[0];
  for (std::size_t i = 2; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - step) > rel_tol * std::abs(step)) return false;
  }
  return true;
}

Panel remove_unit(const Panel& panel, std::size_t unit) {
  const auto M = static_cast<Eigen::Index>(panel.units());
  const auto T = static_cast<Eigen::Index>(panel.periods());
  const auto u = static_cast<Eigen::Index>(unit);
  if (u >= M) throw ValidationError("remove_unit: index out of range");
  Panel out;
  out.values.resize(M - 1, T);
  out.mask.resize(M - 1, T);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < M; ++i) {
    if (i == u) continue;
    out.values.row(r) = panel.values.row(i);
    out.mask.row(r) = panel.mask.row(i);
    out.unit_labels.push_back(panel.unit_labels[static_cast<std::size_t>(i)]);
    ++r;
  }
  out.time_labels = panel.time_labels;
  out.t0 = panel.t0;
  if (panel.treated && *panel.treated != unit) {
    out.treated = *panel.treated > unit ? *panel.treated - 1 : *panel.treated;
  }
  return out;
}

Panel truncate_periods(const Panel& panel, std::size_t periods) {
  if (periods > panel.periods()) throw ValidationError("truncate_periods: too many periods");
  const auto n = static_cast<Eigen::Index>(periods);
  Panel out = panel;
  out.values = panel.values.leftCols(n);
  out.mask = panel.mask.leftCols(n);
  out.time_labels.resize(periods);
  return out;
}

}  // namespace rpsc
