#include "zibr/csv_io.hpp"

#include "zibr/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace zibr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                              : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, std::string_view column, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ValidationError("column '" + std::string(column) + "': '" + std::string(field) +
                              "' is not a finite number",
                          line);
  }
  return value;
}

std::vector<int> resolve_columns(const std::optional<std::vector<std::string>>& wanted,
                                 const std::vector<std::string>& covariates, const char* what) {
  std::vector<int> idx;
  if (!wanted) {
    for (std::size_t j = 0; j < covariates.size(); ++j) idx.push_back(static_cast<int>(j));
    return idx;
  }
  for (const auto& name : *wanted) {
    const auto it = std::find(covariates.begin(), covariates.end(), name);
    if (it == covariates.end()) {
      throw ValidationError(std::string(what) + " column '" + name + "' is not in the header", 1);
    }
    idx.push_back(static_cast<int>(it - covariates.begin()));
  }
  return idx;
}

struct Row {
  double time;
  double y;
  std::vector<double> cov;
};

}  // namespace

Dataset parse_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> covariates;
  bool have_header = false;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<Row, std::size_t>>> groups;
  std::set<std::pair<std::string, double>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto fields = split(view);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "subject" || fields[1] != "time" || fields[2] != "y") {
        throw ValidationError("header must start with 'subject,time,y'", line_no);
      }
      for (std::size_t j = 3; j < fields.size(); ++j) {
        if (fields[j].empty()) throw ValidationError("empty covariate name in header", line_no);
        covariates.emplace_back(fields[j]);
      }
      have_header = true;
      continue;
    }
    if (fields.size() != covariates.size() + 3) {
      throw ValidationError("expected " + std::to_string(covariates.size() + 3) + " fields, found " +
                                std::to_string(fields.size()),
                            line_no);
    }
    const std::string subject(fields[0]);
    if (subject.empty()) throw ValidationError("empty subject id", line_no);
    Row row;
    row.time = parse_number(fields[1], "time", line_no);
    row.y = parse_number(fields[2], "y", line_no);
    if (row.y == 1.0) {
      throw ValidationError(
          "y = 1 is outside the open Beta support; rescale the column, e.g. y * (n - 1) / n + 0.5 / n",
          line_no);
    }
    if (row.y < 0.0 || row.y > 1.0) {
      throw ValidationError("y = " + std::string(fields[2]) + " is outside [0, 1)", line_no);
    }
    for (std::size_t j = 0; j < covariates.size(); ++j) {
      row.cov.push_back(parse_number(fields[j + 3], covariates[j], line_no));
    }
    if (!seen.emplace(subject, row.time).second) {
      throw ValidationError("duplicate observation for subject '" + subject + "' at time " +
                                std::string(fields[1]),
                            line_no);
    }
    auto& group = groups[subject];
    if (group.empty()) order.push_back(subject);
    group.emplace_back(std::move(row), line_no);
  }
  if (!have_header) throw ValidationError("missing header row", line_no ? line_no : 1);

  const std::vector<int> xi = resolve_columns(options.x_cols, covariates, "x");
  const std::vector<int> zi = resolve_columns(options.z_cols, covariates, "z");
  Dataset data;
  data.p = static_cast<int>(xi.size());
  data.r = static_cast<int>(zi.size());
  for (int j : xi) data.x_names.push_back(covariates[static_cast<std::size_t>(j)]);
  for (int j : zi) data.z_names.push_back(covariates[static_cast<std::size_t>(j)]);
  for (const auto& subject : order) {
    auto& rows = groups[subject];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& l, const auto& r) { return l.first.time < r.first.time; });
    Individual ind;
    ind.id = subject;
    for (const auto& [row, ln] : rows) {
      Observation o;
      o.time = row.time;
      o.y = row.y;
      o.x.resize(data.p);
      o.z.resize(data.r);
      for (int j = 0; j < data.p; ++j) o.x[j] = row.cov[static_cast<std::size_t>(xi[static_cast<std::size_t>(j)])];
      for (int j = 0; j < data.r; ++j) o.z[j] = row.cov[static_cast<std::size_t>(zi[static_cast<std::size_t>(j)])];
      ind.obs.push_back(std::move(o));
    }
    data.individuals.push_back(std::move(ind));
  }
  return data;
}

Dataset ingest_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return parse_csv(in, options);
}

void emit_csv(const Dataset& data, std::ostream& out) {
  auto name_of = [](const std::vector<std::string>& names, int j, const char* prefix) {
    return static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                      : prefix + std::to_string(j);
  };
  std::vector<std::string> header;
  std::vector<std::pair<char, int>> source;  // ('x' | 'z', column)
  for (int j = 0; j < data.p; ++j) {
    header.push_back(name_of(data.x_names, j, "x"));
    source.emplace_back('x', j);
  }
  for (int j = 0; j < data.r; ++j) {
    const std::string name = name_of(data.z_names, j, "z");
    if (std::find(header.begin(), header.end(), name) != header.end()) continue;
    header.push_back(name);
    source.emplace_back('z', j);
  }
  out << "subject,time,y";
  for (const auto& h : header) out << ',' << h;
  out << '\n';
  for (const auto& ind : data.individuals) {
    for (const auto& o : ind.obs) {
      out << ind.id << ',' << format_double(o.time) << ',' << format_double(o.y);
      for (const auto& [part, j] : source) out << ',' << format_double(part == 'x' ? o.x[j] : o.z[j]);
      out << '\n';
    }
  }
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  emit_csv(data, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << value;
  return s.str();
}

}  // namespace zibr
