#include "gac/trace.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>

namespace gac {

const char* const kTraceCsvHeader =
    "step,mu,alpha,kl_raw,kl_ema,sft_var_raw,rl_var_raw,disagree_raw,"
    "sft_var_ema,rl_var_ema,disagree_ema,mu_star,mu_ada,mu_blend,"
    "loss_sft,loss_rl,loss_mix,potential,flags";

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<double> RunTrace::mu_series() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const TraceRow& r : rows) out.push_back(r.mu);
  return out;
}

std::vector<double> RunTrace::kl_ema_series() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const TraceRow& r : rows) out.push_back(r.kl_ema);
  return out;
}

std::vector<double> RunTrace::potential_series() const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const TraceRow& r : rows) out.push_back(r.potential);
  return out;
}

std::string trace_to_csv(const RunTrace& trace) {
  std::string out;
  out.reserve(trace.rows.size() * 220 + 256);
  out += "# trace v1 arm=" + trace.arm + " seed=" + std::to_string(trace.seed) +
         " config_hash=" + std::to_string(trace.config_hash);
  if (trace.aborted) out += " aborted=1";
  out += "\n";
  out += kTraceCsvHeader;
  out += "\n";
  for (const TraceRow& r : trace.rows) {
    out += std::to_string(r.step);
    const double cols[] = {r.mu,          r.alpha,       r.kl_raw,
                           r.kl_ema,      r.sft_var_raw, r.rl_var_raw,
                           r.disagree_raw, r.sft_var_ema, r.rl_var_ema,
                           r.disagree_ema, r.mu_star,     r.mu_ada,
                           r.mu_blend,    r.loss_sft,    r.loss_rl,
                           r.loss_mix,    r.potential};
    for (double c : cols) {
      out += ',';
      out += format_double(c);
    }
    out += ',';
    out += std::to_string(r.flags);
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("short write: " + path);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace gac
