// CSV / JSON output and the KCS1 binary ensemble checkpoint.
#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcs/domain.hpp"

namespace kcs::harness {

/// RFC-4180 table: CRLF line ends, quoted fields where needed,
/// doubles printed with 17 significant digits.
class CsvTable {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<Cell> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

std::string format_double(double x);
std::string csv_escape(const std::string& field);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct Checkpoint {
  double time = 0.0;
  ParticleEnsemble ensemble;
};

/// Layout: "KCS1", u64 dim, f64 time, then positions, velocities and weights,
/// each as u64 length followed by that many f64, all little-endian.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

}  // namespace kcs::harness
