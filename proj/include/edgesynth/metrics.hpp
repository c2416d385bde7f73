#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edgesynth/config.hpp"
#include "edgesynth/edge.hpp"
#include "edgesynth/params.hpp"
#include "edgesynth/phantom.hpp"

namespace edgesynth {

enum class Direction { AtoB, BtoA };
Direction direction_from_string(const std::string& s);
const char* direction_name(Direction d);

// 10*log10(max^2 / MSE); max is the joint maximum intensity of both images.
// Identical images report +inf; an all-zero pair has no peak and reports NaN.
double psnr(const Tensor& y, const Tensor& g);
// ||y - g||^2 / ||y||^2; NaN when y is all zero.
double nmse(const Tensor& y, const Tensor& g);
// Single-window SSIM from global (population) moments, c1=0.01^2, c2=0.03^2
// for unit dynamic range.
double ssim_global(const Tensor& y, const Tensor& g);

struct MetricsRow {
  uint32_t id = 0;
  std::string task;
  double psnr_db = 0.0;
  double nmse = 0.0;
  double ssim = 0.0;
  std::optional<double> edge_psnr_db;
  std::optional<double> edge_nmse;
  std::optional<std::string> error;  // per-row failure marker
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  bool with_edge = false;

  Aggregate aggregate(double MetricsRow::* field) const;
  Aggregate aggregate_edge(std::optional<double> MetricsRow::* field) const;
  bool any_error() const;
};

// header: id,task,psnr_db,nmse,ssim[,edge_psnr_db,edge_nmse]
// data rows sorted by id, then `mean` and `std` summary rows; 6 significant
// digits, '.' decimal separator, inf/nan sentinels spelled "inf"/"nan".
void write_csv(std::ostream& os, const MetricsReport& report);
std::string csv_string(const MetricsReport& report);
MetricsReport parse_csv(std::istream& is);

// Synthesizes every test image in the given direction and scores it; edge
// detector (optional) adds PSNR/NMSE between detector(yhat) and detector(y).
MetricsReport evaluate_set(const DatasetManifest& manifest,
                           const ParamStore& model,
                           const EdgeMaeConfig& enc_cfg,
                           const MtNetConfig& mt_cfg, Direction dir,
                           std::optional<EdgeDetector> detector);

}  // namespace edgesynth
