#include "kcs/harness/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kcs::harness {

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> array() {
    const std::uint64_t n = u64();
    if (n > (bytes_.size() - pos_) / 8) throw std::runtime_error("checkpoint: array length exceeds file size");
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t pos_ = 0;

 private:
  const std::vector<unsigned char>& bytes_;
};

constexpr char kMagic[4] = {'K', 'C', 'S', '1'};

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width does not match header");
  rows_.push_back(std::move(row));
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string CsvTable::str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << csv_escape(header_[i]);
  os << "\r\n";
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      if (const auto* d = std::get_if<double>(&row[i]))
        os << format_double(*d);
      else if (const auto* n = std::get_if<long long>(&row[i]))
        os << *n;
      else
        os << csv_escape(std::get<std::string>(row[i]));
    }
    os << "\r\n";
  }
  return os.str();
}

void CsvTable::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << str();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  const ParticleEnsemble& e = c.ensemble;
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put_u64(out, static_cast<std::uint64_t>(e.dim));
  put_f64(out, c.time);
  for (const auto* arr : {&e.positions, &e.velocities, &e.weights}) {
    put_u64(out, arr->size());
    for (double x : *arr) put_f64(out, x);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic bytes");
  Reader r(bytes);
  r.pos_ = 4;
  Checkpoint c;
  const std::uint64_t dim = r.u64();
  if (dim < 1 || dim > static_cast<std::uint64_t>(kMaxDim)) throw std::runtime_error("checkpoint: bad dimension");
  c.ensemble.dim = static_cast<int>(dim);
  c.time = r.f64();
  c.ensemble.positions = r.array();
  c.ensemble.velocities = r.array();
  c.ensemble.weights = r.array();
  if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
  const std::size_t n = c.ensemble.weights.size();
  if (c.ensemble.positions.size() != n * dim || c.ensemble.velocities.size() != n * dim)
    throw std::runtime_error("checkpoint: inconsistent array lengths");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_checkpoint(c);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace kcs::harness
