#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "edgesynth/edge.hpp"
#include "edgesynth/edgemae.hpp"
#include "edgesynth/mask.hpp"
#include "edgesynth/metrics.hpp"
#include "edgesynth/mtnet.hpp"
#include "edgesynth/ntf.hpp"
#include "edgesynth/patch.hpp"
#include "edgesynth/phantom.hpp"

namespace py = pybind11;
using namespace edgesynth;

namespace {

py::array_t<double> tensor_to_array(const Tensor& t) {
  std::vector<ssize_t> shape(t.shape.begin(), t.shape.end());
  if (shape.empty()) shape.push_back(1);
  py::array_t<double> arr(shape);
  std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
  return arr;
}

Tensor array_to_tensor(const py::array_t<double, py::array::c_style |
                                                      py::array::forcecast>& a) {
  std::vector<int> shape(a.ndim());
  for (ssize_t i = 0; i < a.ndim(); ++i)
    shape[static_cast<size_t>(i)] = static_cast<int>(a.shape(i));
  Tensor t(shape);
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

Image array_to_image(const py::array_t<double, py::array::c_style |
                                                    py::array::forcecast>& a,
                     const std::string& modality) {
  Tensor t = array_to_tensor(a);
  return Image::from_tensor(t, modality_from_string(modality));
}

}  // namespace

PYBIND11_MODULE(edgesynth, m) {
  m.doc() = "Edge-aware masked-autoencoder pretraining and multi-scale "
            "transformer fine-tuning for cross-modality image synthesis";

  // phantom data
  m.def(
      "render_phantom",
      [](uint64_t seed, int size) {
        return tensor_to_array(render_base_anatomy(seed, size).to_tensor());
      },
      py::arg("seed"), py::arg("size") = 64,
      "Deterministic synthetic base-anatomy image in [0,1]");
  m.def(
      "derive_modality_b",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             base) {
        auto [a, b] = derive_modalities(array_to_image(base, "A"));
        (void)a;
        return tensor_to_array(b.to_tensor());
      },
      py::arg("base"), "B = clip((1 - base)^1.5)");
  m.def(
      "generate_dataset",
      [](uint64_t seed, int n_train, int n_test, int size,
         const std::string& out_dir) {
        DatasetManifest man =
            generate_dataset(seed, n_train, n_test, size, out_dir);
        return man.entries.size();
      },
      py::arg("seed"), py::arg("n_train"), py::arg("n_test"),
      py::arg("size") = 64, py::arg("out_dir"),
      "Write a paired phantom dataset; returns the manifest entry count");

  // patches and masks
  m.def(
      "patchify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         int patch) {
        return tensor_to_array(patchify(array_to_tensor(img), patch).tokens);
      },
      py::arg("img"), py::arg("patch") = 8);
  m.def(
      "unpatchify",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             tokens,
         int grid_h, int grid_w, int patch) {
        PatchGrid g;
        g.tokens = array_to_tensor(tokens);
        g.grid_h = grid_h;
        g.grid_w = grid_w;
        g.patch = patch;
        return tensor_to_array(unpatchify(g).to_tensor());
      },
      py::arg("tokens"), py::arg("grid_h"), py::arg("grid_w"),
      py::arg("patch") = 8);
  m.def(
      "sample_mask",
      [](int grid_h, int grid_w, double ratio, uint64_t seed) {
        Rng rng(seed);
        return tensor_to_array(
            sample_mask(grid_h, grid_w, ratio, rng).to_tensor());
      },
      py::arg("grid_h"), py::arg("grid_w"), py::arg("ratio"), py::arg("seed"),
      "0/1 grid with exactly floor(ratio * n) ones");
  m.def(
      "compute_alpha",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>&
             mask) {
        Tensor t = array_to_tensor(mask);
        MaskPlan plan;
        plan.grid_h = t.shape[0];
        plan.grid_w = t.shape[1];
        plan.mask.resize(t.data.size());
        for (size_t i = 0; i < t.data.size(); ++i)
          plan.mask[i] = t.data[i] != 0.0 ? 1 : 0;
        return tensor_to_array(compute_alpha(plan));
      },
      py::arg("mask"), "3x3 valid-neighbor mean of the binary mask");
  m.def("stage_weight", &stage_weight, py::arg("alpha"), py::arg("stage"),
        "2 - alpha for stage 1, 1 + alpha for stage 2");

  // edge maps
  auto edge_fn = [](const py::array_t<double, py::array::c_style |
                                                  py::array::forcecast>& img,
                    EdgeDetector d) {
    return tensor_to_array(edge_map(array_to_tensor(img), d));
  };
  m.def(
      "sobel",
      [edge_fn](const py::array_t<double, py::array::c_style |
                                              py::array::forcecast>& img) {
        return edge_fn(img, EdgeDetector::Sobel);
      },
      py::arg("img"));
  m.def(
      "prewitt",
      [edge_fn](const py::array_t<double, py::array::c_style |
                                              py::array::forcecast>& img) {
        return edge_fn(img, EdgeDetector::Prewitt);
      },
      py::arg("img"));

  // metrics
  auto metric = [](double (*fn)(const Tensor&, const Tensor&)) {
    return [fn](const py::array_t<double, py::array::c_style |
                                              py::array::forcecast>& y,
                const py::array_t<double, py::array::c_style |
                                              py::array::forcecast>& g) {
      return fn(array_to_tensor(y), array_to_tensor(g));
    };
  };
  m.def("psnr", metric(&psnr), py::arg("y"), py::arg("g"));
  m.def("nmse", metric(&nmse), py::arg("y"), py::arg("g"));
  m.def("ssim_global", metric(&ssim_global), py::arg("y"), py::arg("g"));

  // tensor files
  m.def(
      "read_ntf",
      [](const std::string& path) { return tensor_to_array(ntf_read(path)); },
      py::arg("path"));
  m.def(
      "write_ntf",
      [](const std::string& path,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             arr) { ntf_write(path, array_to_tensor(arr)); },
      py::arg("path"), py::arg("array"));

  // model-level entry points (checkpoint directories on disk)
  m.def(
      "impute",
      [](const std::string& ckpt_dir,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img,
         double ratio, uint64_t seed) {
        ParamStore model = load_checkpoint(ckpt_dir);
        EdgeMaeConfig cfg = read_enc_config(model);
        if (ratio <= 0.0) ratio = cfg.mask_ratio;
        Rng rng(seed);
        MaskPlan mask = sample_mask(cfg.grid(), cfg.grid(), ratio, rng);
        MaeForward fwd = mae_forward(array_to_image(img, "A"), mask, model, cfg);
        return py::make_tuple(tensor_to_array(mask.to_tensor()),
                              tensor_to_array(fwd.imputed),
                              tensor_to_array(fwd.edge));
      },
      py::arg("ckpt_dir"), py::arg("img"), py::arg("ratio") = 0.0,
      py::arg("seed") = 7,
      "Returns (mask_grid, imputed_image, estimated_edge_map)");
  m.def(
      "synthesize",
      [](const std::string& ckpt_dir,
         const py::array_t<double, py::array::c_style | py::array::forcecast>&
             img) {
        ParamStore model = load_checkpoint(ckpt_dir);
        EdgeMaeConfig enc_cfg = read_enc_config(model);
        MtNetConfig mt_cfg = read_mt_config(model, enc_cfg);
        Image out = synthesize(array_to_image(img, "A"), model, enc_cfg, mt_cfg);
        return tensor_to_array(out.to_tensor());
      },
      py::arg("ckpt_dir"), py::arg("img"),
      "Cross-modality synthesis with a fine-tuned checkpoint");
}
