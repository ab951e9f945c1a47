#include "ionxy/serialize.hpp"

#include "ionxy/error.hpp"
#include "ionxy/units.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ionxy {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModule = "cli-io";

json vec(const std::vector<double>& v) { return json(v); }

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string cell(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace

json to_json(const TrapConfig& t) {
  return {{"omega_x", t.omega_x}, {"omega_y", t.omega_y}, {"omega_z", t.omega_z}, {"mass", t.mass},
          {"delta_k", t.delta_k}, {"units", "rad/s, kg, 1/m"}};
}

json to_json(const ModeSet& m) {
  std::vector<double> hz_vals;
  for (double w : m.omega) hz_vals.push_back(w / kTwoPi);
  return {{"axis", m.axis}, {"omega", vec(m.omega)}, {"frequency_hz", hz_vals}, {"b", mat(m.b)}, {"eta", mat(m.eta)}};
}

json to_json(const CouplingMatrix& c) {
  return {{"axis_label", c.axis_label}, {"mu", c.mu}, {"modes_used", c.modes_used}, {"J", mat(c.J)},
          {"max_abs", c.size() ? c.max_abs() : 0.0}, {"units", "rad/s"}};
}

json to_json(const ValidityReport& r) {
  return {{"separation_ratio", finite_or_null(r.separation_ratio)},
          {"slow_regime_ratios", vec(r.slow_regime_ratios)},
          {"lambda_bound", finite_or_null(r.lambda_bound)},
          {"separation_verdict", to_string(r.separation_verdict)},
          {"slow_regime_verdict", to_string(r.slow_regime_verdict)},
          {"verdict", to_string(r.verdict)},
          {"note", r.note}};
}

json to_json(const PowerLawDesign& d) {
  return {{"target_alpha", d.target_alpha}, {"alpha", d.alpha},    {"mu1", d.mu1},
          {"detuning", d.detuning},         {"rabi", d.rabi},      {"max_jx", d.jx.size() ? d.jx.max_abs() : 0.0}};
}

json to_json(const ModeSpectrumReport& r) {
  return {{"n_ions", r.n_ions}, {"x_modes", vec(r.x_modes)}, {"y_modes", vec(r.y_modes)},
          {"min_gap", r.min_gap}, {"band_gap", r.band_gap}, {"overlap", r.overlap}};
}

json to_json(const MagnusDiagnostics& d) {
  return {{"tau_points", d.tau.size()},
          {"max_chi_slope", d.max_chi_slope},
          {"chi_x_slope", mat(d.chi_x_slope)},
          {"chi_y_slope", mat(d.chi_y_slope)},
          {"lambda_slope", mat(d.lambda_slope)},
          {"zeta_slope", std::vector<double>(d.zeta_slope.data(), d.zeta_slope.data() + d.zeta_slope.size())},
          {"max_lambda", d.max_lambda},
          {"max_zeta", d.max_zeta},
          {"max_phi", d.max_phi},
          {"secular_ratio", finite_or_null(d.secular_ratio)},
          {"lambda_bound", finite_or_null(d.lambda_bound)},
          {"bound_satisfied", d.bound_satisfied},
          {"jx_max", d.jx_max},
          {"jy_max", d.jy_max}};
}

json to_json(const OscillationFit& f) {
  return {{"omega", f.omega},         {"omega_err", f.omega_err}, {"T", finite_or_null(f.T)},
          {"T_err", finite_or_null(f.T_err)}, {"alpha", f.alpha},  {"beta", f.beta},
          {"phi", f.phi},             {"C", f.C},                 {"rms_residual", f.rms_residual},
          {"stderr", f.stderr_}};
}

json to_json(const BaselineResult& b) {
  return {{"mu1", b.mu1},
          {"mu2", b.mu2},
          {"rabi_x", b.rabi_x},
          {"rabi_y", b.rabi_y},
          {"jx12", b.jx.size() > 1 ? b.jx(0, 1) : 0.0},
          {"jy12", b.jy.size() > 1 ? b.jy(0, 1) : 0.0},
          {"mean_phonons", b.mean_phonons},
          {"mean_phonons_avg", b.mean_phonons_avg},
          {"max_leakage", b.max_leakage}};
}

void CsvTable::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw Error(ErrorKind::DimensionMismatch, kModule, "CsvTable",
                fmt::format("row has {} cells, table has {} columns", row.size(), columns.size()));
  rows.push_back(std::move(row));
}

std::string csv_text(const CsvTable& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += ',';
    out += t.columns[c].name;
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += cell(row[c]);
    }
    out += '\n';
  }
  return out;
}

json csv_schema(const CsvTable& t, const std::string& file_name) {
  json cols = json::array();
  for (const auto& c : t.columns)
    cols.push_back({{"name", c.name}, {"type", "number"}, {"unit", c.unit}, {"description", c.description}});
  return {{"file", file_name}, {"format", "csv"}, {"header", true}, {"delimiter", ","},
          {"rows", t.rows.size()}, {"description", t.description}, {"columns", cols}};
}

CsvTable coupling_table(const CouplingMatrix& c) {
  CsvTable t;
  t.description = fmt::format("coupling matrix {} (rad/s), row-major", c.axis_label);
  t.columns.push_back({"ion", "", "row ion index (1-based)"});
  for (std::size_t j = 0; j < c.size(); ++j)
    t.columns.push_back({fmt::format("{}", j + 1), "rad/s", fmt::format("J_i{}", j + 1)});
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<double> row{static_cast<double>(i + 1)};
    for (std::size_t j = 0; j < c.size(); ++j) row.push_back(c(i, j));
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable trajectory_table(const Trajectory& tr, double time_scale, const std::string& time_unit) {
  CsvTable t;
  const std::size_t n = tr.spec.n_ions;
  const std::size_t s_dim = tr.spec.spin_dim();
  t.description = "spin populations (phonons traced out), per-ion up probability, mean phonon numbers, top-level "
                  "population";
  t.columns.push_back({"t", time_unit, "sample time"});
  for (std::size_t s = 0; s < s_dim; ++s)
    t.columns.push_back({"P_" + spin_label(s, n), "", "population of spin basis state (d = down, u = up)"});
  for (std::size_t i = 0; i < n; ++i)
    t.columns.push_back({fmt::format("P_up_{}", i + 1), "", fmt::format("probability that ion {} is up", i + 1)});
  for (std::size_t k = 0; k < static_cast<std::size_t>(tr.mean_n.cols()); ++k)
    t.columns.push_back({fmt::format("n_{}", k), "", fmt::format("mean phonon number of included mode {}", k)});
  t.columns.push_back({"leakage", "", "largest top-Fock-level population"});
  for (std::size_t r = 0; r < tr.size(); ++r) {
    std::vector<double> row{tr.times[r] / time_scale};
    const auto R = static_cast<Eigen::Index>(r);
    for (std::size_t s = 0; s < s_dim; ++s) row.push_back(tr.populations(R, static_cast<Eigen::Index>(s)));
    for (std::size_t i = 0; i < n; ++i) {
      double up = 0.0;
      for (std::size_t s = 0; s < s_dim; ++s)
        if ((s >> (n - 1 - i)) & 1U) up += tr.populations(R, static_cast<Eigen::Index>(s));
      row.push_back(up);
    }
    for (Eigen::Index k = 0; k < tr.mean_n.cols(); ++k) row.push_back(tr.mean_n(R, k));
    row.push_back(r < tr.leakage.size() ? tr.leakage[r] : 0.0);
    t.add_row(std::move(row));
  }
  return t;
}

CsvTable mode_table(const ModeSet& m) {
  CsvTable t;
  t.description = fmt::format("normal modes of axis {}", m.axis);
  t.columns = {{"mode", "", "index, descending frequency"},
               {"omega", "rad/s", "angular frequency"},
               {"frequency_hz", "Hz", "omega / 2 pi"}};
  for (std::size_t i = 0; i < m.n_ions(); ++i) t.columns.push_back({fmt::format("b_{}", i + 1), "", "mode vector"});
  for (std::size_t i = 0; i < m.n_ions(); ++i) t.columns.push_back({fmt::format("eta_{}", i + 1), "", "Lamb-Dicke"});
  for (std::size_t k = 0; k < m.n_modes(); ++k) {
    std::vector<double> row{static_cast<double>(k), m.omega[k], m.omega[k] / kTwoPi};
    for (std::size_t i = 0; i < m.n_ions(); ++i) row.push_back(m.b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    for (std::size_t i = 0; i < m.n_ions(); ++i) row.push_back(m.eta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
    t.add_row(std::move(row));
  }
  return t;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::IoError, kModule, "sha256", "digest computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, kModule, "sha256", fmt::format("cannot read {}", path.string()), "output");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

OutputSink::OutputSink(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw Error(ErrorKind::IoError, kModule, "OutputSink",
                fmt::format("cannot create output directory {}: {}", dir_.string(), ec.message()), "out");
}

void OutputSink::write_bytes(const std::string& file_name, const std::string& bytes) {
  const fs::path p = dir_ / file_name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, kModule, "write", fmt::format("cannot open {}", p.string()), "out");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, kModule, "write", fmt::format("short write on {}", p.string()), "out");
  if (std::find(files_.begin(), files_.end(), file_name) == files_.end()) files_.push_back(file_name);
}

void OutputSink::write_csv(const std::string& name, const CsvTable& table) {
  write_bytes(name + ".csv", csv_text(table));
  write_json(name + ".schema.json", csv_schema(table, name + ".csv"));
}

void OutputSink::write_json(const std::string& file_name, const json& j) { write_bytes(file_name, j.dump(2) + "\n"); }

void OutputSink::write_text(const std::string& file_name, const std::string& text) { write_bytes(file_name, text); }

void OutputSink::write_states(const std::string& name, const Trajectory& tr) {
  if (!tr.has_states())
    throw Error(ErrorKind::MissingStates, kModule, "write_states", "trajectory holds no states",
                "output.states");
  std::string bytes;
  const std::size_t dim = static_cast<std::size_t>(tr.states.front().size());
  bytes.reserve(tr.states.size() * dim * 16);
  for (const auto& psi : tr.states)
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
      const double re = psi[i].real();
      const double im = psi[i].imag();
      char buf[16];
      std::memcpy(buf, &re, 8);
      std::memcpy(buf + 8, &im, 8);
      bytes.append(buf, 16);
    }
  write_bytes(name + ".bin", bytes);
  std::vector<std::size_t> modes = tr.spec.modes;
  write_json(name + ".json",
             {{"file", name + ".bin"},
              {"encoding", "float64 little-endian, interleaved (re, im) per amplitude, one record per sample"},
              {"samples", tr.states.size()},
              {"dimension", dim},
              {"times", tr.times},
              {"n_ions", tr.spec.n_ions},
              {"modes", modes},
              {"levels", tr.spec.levels()},
              {"basis_order",
               "index = spin * phonon_dim + phonon; spin bits with ion 1 most significant, down = 0, up = 1; "
               "phonon digits base n_max + 1 with the first included mode most significant"}});
}

json OutputSink::file_list() const {
  json list = json::array();
  for (const auto& f : files_) {
    const fs::path p = dir_ / f;
    list.push_back({{"file", f}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
  }
  return list;
}

}  // namespace ionxy
