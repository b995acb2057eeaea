#include "uqkit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uqkit/error.hpp"

namespace uq {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  require(it != header.end(), ErrorKind::DataError, "column '" + std::string(name) + "' not found");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::vector<double> values;
  std::size_t line_no = 0, rows = 0;
  bool have_header = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    require(line.find('"') == std::string_view::npos, ErrorKind::DataError,
            "line " + std::to_string(line_no) + ": quoted fields are not supported");
    const auto fields = split_fields(line);
    if (!have_header) {
      for (auto f : fields) {
        require(!f.empty(), ErrorKind::DataError, "header has an empty column name");
        require(std::find(table.header.begin(), table.header.end(), f) == table.header.end(), ErrorKind::DataError,
                "duplicate column '" + std::string(f) + "'");
        table.header.emplace_back(f);
      }
      have_header = true;
      continue;
    }
    require(fields.size() == table.header.size(), ErrorKind::DataError,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) + " fields, got " +
                std::to_string(fields.size()));
    for (auto f : fields) {
      double v = 0.0;
      const char* begin = f.data();
      const char* end = f.data() + f.size();
      if (!f.empty() && *begin == '+') ++begin;
      const auto res = std::from_chars(begin, end, v);
      require(!f.empty() && res.ec == std::errc() && res.ptr == end && std::isfinite(v), ErrorKind::DataError,
              "line " + std::to_string(line_no) + ": '" + std::string(f) + "' is not a finite number");
      values.push_back(v);
    }
    ++rows;
  }
  require(have_header, ErrorKind::DataError, "CSV has no header row");
  table.values = Matrix(rows, table.header.size(), std::move(values));
  return table;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out << text;
  require(static_cast<bool>(out), ErrorKind::IoError, "write to '" + path.string() + "' failed");
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string write_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t c = 0; c < table.header.size(); ++c) out += (c ? "," : "") + table.header[c];
  out += '\n';
  for (std::size_t r = 0; r < table.values.rows(); ++r) {
    for (std::size_t c = 0; c < table.values.cols(); ++c) out += (c ? "," : "") + format_number(table.values(r, c));
    out += '\n';
  }
  return out;
}

Dataset dataset_from_table(const CsvTable& table, const std::string& target_column, TaskKind kind,
                           std::optional<std::size_t> n_classes) {
  const std::size_t t = table.column(target_column);
  const std::size_t n = table.values.rows(), d = table.header.size() - 1;
  require(n >= 1, ErrorKind::DataError, "dataset has no rows");
  Matrix x(n, d);
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (c != t) names.push_back(table.header[c]);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (c == t) y[r] = table.values(r, c);
      else x(r, out_c++) = table.values(r, c);
    }
  }
  Task task = Task::regression();
  if (kind == TaskKind::Classification) {
    std::size_t k = n_classes.value_or(0);
    if (!n_classes) {
      double top = 0.0;
      for (double v : y) top = std::max(top, v);
      k = std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1);
    }
    task = Task::classification(k);
  }
  return make_dataset(std::move(x), std::move(y), task, std::move(names));
}

Dataset read_dataset(const std::filesystem::path& path, const std::string& target_column, TaskKind kind,
                     std::optional<std::size_t> n_classes) {
  return dataset_from_table(read_csv(path), target_column, kind, n_classes);
}

Matrix read_features(const std::filesystem::path& path, const std::vector<std::string>& expected_names) {
  const CsvTable table = read_csv(path);
  std::vector<std::size_t> cols;
  for (const auto& name : expected_names) cols.push_back(table.column(name));
  Matrix x(table.values.rows(), cols.size());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) x(r, c) = table.values(r, cols[c]);
  return x;
}

std::string dataset_to_csv(const Dataset& data, const std::string& target_column) {
  CsvTable t;
  t.header = data.feature_names;
  t.header.push_back(target_column);
  t.values = Matrix(data.size(), data.dim() + 1);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (std::size_t c = 0; c < data.dim(); ++c) t.values(r, c) = data.features(r, c);
    t.values(r, data.dim()) = data.target[r];
  }
  return write_csv(t);
}

Json prediction_to_json(const Prediction& pred) {
  if (const auto* r = std::get_if<RegressionPrediction>(&pred)) {
    Json j{{"task", "regression"}, {"y_hat", r->y_hat}, {"y_lower", r->y_lower}, {"y_upper", r->y_upper}};
    if (r->y_std) j["y_std"] = *r->y_std;
    return j;
  }
  const auto& c = std::get<ClassificationPrediction>(pred);
  Json rows = Json::array();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto r = c.probs.row(i);
    rows.push_back(Vector(r.begin(), r.end()));
  }
  return Json{{"task", "classification"},
              {"probs", rows},
              {"predicted_class", c.predicted_class},
              {"confidence", c.confidence}};
}

Prediction prediction_from_json(const Json& j) {
  try {
    const std::string task = j.at("task").get<std::string>();
    if (task == "regression") {
      RegressionPrediction r;
      r.y_hat = vector_from_json(j.at("y_hat"));
      r.y_lower = vector_from_json(j.at("y_lower"));
      r.y_upper = vector_from_json(j.at("y_upper"));
      if (j.contains("y_std")) r.y_std = vector_from_json(j.at("y_std"));
      r.validate();
      return r;
    }
    require(task == "classification", ErrorKind::DataError, "unknown prediction task '" + task + "'");
    const Json& pj = j.at("probs");
    Matrix probs;
    if (pj.is_object()) {
      probs = matrix_from_json(pj);
    } else {
      require(pj.is_array() && !pj.empty(), ErrorKind::DataError, "'probs' must be a non-empty list of rows");
      const std::size_t k = pj.at(0).size();
      probs = Matrix(pj.size(), k);
      for (std::size_t i = 0; i < pj.size(); ++i) {
        require(pj.at(i).is_array() && pj.at(i).size() == k, ErrorKind::DataError, "ragged 'probs' rows");
        for (std::size_t c = 0; c < k; ++c) probs(i, c) = pj.at(i).at(c).get<double>();
      }
    }
    ClassificationPrediction c = ClassificationPrediction::from_probs(std::move(probs));
    if (j.contains("confidence")) c.confidence = vector_from_json(j.at("confidence"));
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    fail(ErrorKind::DataError, std::string("malformed predictions file: ") + e.what());
  }
}

std::string prediction_to_csv(const Prediction& pred) {
  CsvTable t;
  if (const auto* r = std::get_if<RegressionPrediction>(&pred)) {
    t.header = {"y_hat", "y_lower", "y_upper"};
    if (r->y_std) t.header.push_back("y_std");
    t.values = Matrix(r->size(), t.header.size());
    for (std::size_t i = 0; i < r->size(); ++i) {
      t.values(i, 0) = r->y_hat[i];
      t.values(i, 1) = r->y_lower[i];
      t.values(i, 2) = r->y_upper[i];
      if (r->y_std) t.values(i, 3) = (*r->y_std)[i];
    }
    return write_csv(t);
  }
  const auto& c = std::get<ClassificationPrediction>(pred);
  t.header = {"predicted_class", "confidence"};
  for (std::size_t k = 0; k < c.n_classes(); ++k) t.header.push_back("p" + std::to_string(k));
  t.values = Matrix(c.size(), t.header.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    t.values(i, 0) = static_cast<double>(c.predicted_class[i]);
    t.values(i, 1) = c.confidence[i];
    for (std::size_t k = 0; k < c.n_classes(); ++k) t.values(i, 2 + k) = c.probs(i, k);
  }
  return write_csv(t);
}

}  // namespace uq
