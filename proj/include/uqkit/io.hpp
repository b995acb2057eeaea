#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "uqkit/core.hpp"

namespace uq {

// Comma-separated text with a required header row. Quoting is not supported.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  std::size_t column(std::string_view name) const;  // DataError when absent
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
// Canonical form: shortest round-trip number formatting, '\n' line ends.
std::string write_csv(const CsvTable& table);

// Classification with n_classes unset takes max(label) + 1 (at least 2).
Dataset dataset_from_table(const CsvTable& table, const std::string& target_column, TaskKind kind,
                           std::optional<std::size_t> n_classes = std::nullopt);
Dataset read_dataset(const std::filesystem::path& path, const std::string& target_column, TaskKind kind,
                     std::optional<std::size_t> n_classes = std::nullopt);
// Selects the named feature columns; other columns are ignored.
Matrix read_features(const std::filesystem::path& path, const std::vector<std::string>& expected_names);
std::string dataset_to_csv(const Dataset& data, const std::string& target_column);

Json prediction_to_json(const Prediction& pred);
Prediction prediction_from_json(const Json& j);
std::string prediction_to_csv(const Prediction& pred);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace uq
