#include "edgesynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>

#include "edgesynth/mtnet.hpp"

namespace edgesynth {

Direction direction_from_string(const std::string& s) {
  if (s == "A2B" || s == "a2b") return Direction::AtoB;
  if (s == "B2A" || s == "b2a") return Direction::BtoA;
  throw ConfigError("unknown direction: " + s + " (want A2B|B2A)");
}

const char* direction_name(Direction d) {
  return d == Direction::AtoB ? "A2B" : "B2A";
}

double psnr(const Tensor& y, const Tensor& g) {
  ES_CHECK(y.same_shape(g), "psnr shape mismatch");
  double mx = 0.0, mse = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    mx = std::max(mx, std::max(y.data[i], g.data[i]));
    double d = y.data[i] - g.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(y.numel());
  if (mx <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mx * mx / mse);
}

double nmse(const Tensor& y, const Tensor& g) {
  ES_CHECK(y.same_shape(g), "nmse shape mismatch");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    double d = y.data[i] - g.data[i];
    num += d * d;
    den += y.data[i] * y.data[i];
  }
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return num / den;
}

double ssim_global(const Tensor& y, const Tensor& g) {
  ES_CHECK(y.same_shape(g), "ssim shape mismatch");
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double n = static_cast<double>(y.numel());
  double mu_y = 0.0, mu_g = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    mu_y += y.data[i];
    mu_g += g.data[i];
  }
  mu_y /= n;
  mu_g /= n;
  double var_y = 0.0, var_g = 0.0, cov = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    double dy = y.data[i] - mu_y;
    double dg = g.data[i] - mu_g;
    var_y += dy * dy;
    var_g += dg * dg;
    cov += dy * dg;
  }
  var_y /= n;
  var_g /= n;
  cov /= n;
  return ((2.0 * mu_y * mu_g + c1) * (2.0 * cov + c2)) /
         ((mu_y * mu_y + mu_g * mu_g + c1) * (var_y + var_g + c2));
}

Aggregate MetricsReport::aggregate(double MetricsRow::* field) const {
  Aggregate a;
  int n = 0;
  for (const auto& r : rows) {
    if (r.error) continue;
    a.mean += r.*field;
    ++n;
  }
  if (n == 0) return a;
  a.mean /= n;
  for (const auto& r : rows) {
    if (r.error) continue;
    double d = r.*field - a.mean;
    a.stddev += d * d;
  }
  a.stddev = std::sqrt(a.stddev / n);
  return a;
}

Aggregate MetricsReport::aggregate_edge(
    std::optional<double> MetricsRow::* field) const {
  Aggregate a;
  int n = 0;
  for (const auto& r : rows) {
    if (r.error || !(r.*field)) continue;
    a.mean += *(r.*field);
    ++n;
  }
  if (n == 0) return a;
  a.mean /= n;
  for (const auto& r : rows) {
    if (r.error || !(r.*field)) continue;
    double d = *(r.*field) - a.mean;
    a.stddev += d * d;
  }
  a.stddev = std::sqrt(a.stddev / n);
  return a;
}

bool MetricsReport::any_error() const {
  for (const auto& r : rows)
    if (r.error) return true;
  return false;
}

namespace {

std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double parse_value(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

void write_csv(std::ostream& os, const MetricsReport& report) {
  os << "id,task,psnr_db,nmse,ssim";
  if (report.with_edge) os << ",edge_psnr_db,edge_nmse";
  os << "\n";
  auto emit_row = [&](const std::string& id_field, const std::string& task,
                      double p, double m, double s,
                      std::optional<double> ep, std::optional<double> em) {
    os << id_field << "," << task << "," << fmt6(p) << "," << fmt6(m) << ","
       << fmt6(s);
    if (report.with_edge)
      os << "," << (ep ? fmt6(*ep) : "") << "," << (em ? fmt6(*em) : "");
    os << "\n";
  };
  for (const auto& r : report.rows) {
    if (r.error) {
      os << r.id << "," << r.task << ",error:" << *r.error << ",,";
      if (report.with_edge) os << ",,";
      os << "\n";
      continue;
    }
    emit_row(std::to_string(r.id), r.task, r.psnr_db, r.nmse, r.ssim,
             r.edge_psnr_db, r.edge_nmse);
  }
  std::string task = report.rows.empty() ? "" : report.rows.front().task;
  auto p = report.aggregate(&MetricsRow::psnr_db);
  auto m = report.aggregate(&MetricsRow::nmse);
  auto s = report.aggregate(&MetricsRow::ssim);
  auto ep = report.aggregate_edge(&MetricsRow::edge_psnr_db);
  auto em = report.aggregate_edge(&MetricsRow::edge_nmse);
  std::optional<double> epm, emm, eps, ems;
  if (report.with_edge) {
    epm = ep.mean;
    emm = em.mean;
    eps = ep.stddev;
    ems = em.stddev;
  }
  emit_row("mean", task, p.mean, m.mean, s.mean, epm, emm);
  emit_row("std", task, p.stddev, m.stddev, s.stddev, eps, ems);
}

std::string csv_string(const MetricsReport& report) {
  std::ostringstream os;
  write_csv(os, report);
  return os.str();
}

MetricsReport parse_csv(std::istream& is) {
  MetricsReport rep;
  std::string line;
  if (!std::getline(is, line)) throw IoError("empty metrics CSV");
  rep.with_edge = line.find("edge_psnr_db") != std::string::npos;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < (rep.with_edge ? 7u : 5u)) f.push_back("");
    if (f[0] == "mean" || f[0] == "std") continue;  // recomputable
    MetricsRow r;
    r.id = static_cast<uint32_t>(std::stoul(f[0]));
    r.task = f[1];
    if (f[2].rfind("error:", 0) == 0) {
      r.error = f[2].substr(6);
    } else {
      r.psnr_db = parse_value(f[2]);
      r.nmse = parse_value(f[3]);
      r.ssim = parse_value(f[4]);
      if (rep.with_edge && !f[5].empty()) r.edge_psnr_db = parse_value(f[5]);
      if (rep.with_edge && !f[6].empty()) r.edge_nmse = parse_value(f[6]);
    }
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

MetricsReport evaluate_set(const DatasetManifest& manifest,
                           const ParamStore& model,
                           const EdgeMaeConfig& enc_cfg,
                           const MtNetConfig& mt_cfg, Direction dir,
                           std::optional<EdgeDetector> detector) {
  auto ids = manifest.ids(Split::Test);
  ES_CONFIG_CHECK(!ids.empty(), "test split is empty");
  std::sort(ids.begin(), ids.end());
  Modality src_mod = dir == Direction::AtoB ? Modality::A : Modality::B;
  Modality dst_mod = dir == Direction::AtoB ? Modality::B : Modality::A;
  MetricsReport rep;
  rep.with_edge = detector.has_value();
  for (uint32_t id : ids) {
    MetricsRow row;
    row.id = id;
    row.task = direction_name(dir);
    try {
      Image src = manifest.load_image(id, src_mod);
      Image truth = manifest.load_image(id, dst_mod);
      Image out = synthesize(src, model, enc_cfg, mt_cfg);
      Tensor y = truth.to_tensor();
      Tensor g = out.to_tensor();
      row.psnr_db = psnr(y, g);
      row.nmse = nmse(y, g);
      row.ssim = ssim_global(y, g);
      if (detector) {
        Tensor ye = edge_map(y, *detector);
        Tensor ge = edge_map(g, *detector);
        row.edge_psnr_db = psnr(ye, ge);
        row.edge_nmse = nmse(ye, ge);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace edgesynth
