#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "edgesynth/edgemae.hpp"
#include "edgesynth/gradcheck.hpp"
#include "edgesynth/metrics.hpp"
#include "edgesynth/mtnet.hpp"
#include "edgesynth/ntf.hpp"
#include "edgesynth/phantom.hpp"
#include "edgesynth/train.hpp"

namespace fs = std::filesystem;
using namespace edgesynth;

namespace {

void log_kv(const std::string& key, const std::string& value) {
  std::cerr << "  " << key << " = " << value << "\n";
}

void log_config_header(const std::string& cmd) {
  std::cerr << "[edgesynth] " << cmd << " resolved config:\n";
}

void add_enc_options(CLI::App* cmd, EdgeMaeConfig& cfg) {
  cmd->add_option("--image-size", cfg.image_size, "Image side length");
  cmd->add_option("--patch-size", cfg.patch_size, "Patch side length");
  cmd->add_option("--enc-dim", cfg.enc_dim, "Encoder embedding dim");
  cmd->add_option("--enc-layers", cfg.enc_layers, "Encoder transformer layers");
  cmd->add_option("--enc-heads", cfg.enc_heads, "Encoder attention heads");
  cmd->add_option("--dec-dim", cfg.dec_dim, "Decoder embedding dim");
  cmd->add_option("--dec-heads", cfg.dec_heads, "Decoder attention heads");
  cmd->add_option("--dec-layers", cfg.dec_layers, "Decoder transformer layers");
  cmd->add_option("--dec-shared-layers", cfg.dec_shared_layers,
                  "Leading decoder layers shared by both task heads");
  cmd->add_option("--lambda-imp", cfg.lambda_imp, "Imputation loss weight");
  cmd->add_option("--lambda-edge", cfg.lambda_edge, "Edge loss weight");
}

void setup_config_file(CLI::App* cmd) {
  cmd->set_config("--config", "", "Config file with `key = value` lines");
  cmd->allow_config_extras(CLI::config_extras_mode::error);
}

int run(int argc, char** argv) {
  CLI::App app{"Edge-aware masked-autoencoder pretraining and multi-scale "
               "transformer fine-tuning for cross-modality image synthesis"};
  app.require_subcommand(1);

  // ---- gen-data ----------------------------------------------------------
  struct {
    std::string out;
    int n_train = 16;
    int n_test = 4;
    int size = 64;
    uint64_t seed = 7;
    double paired_ratio = 1.0;
  } gen;
  auto* cmd_gen = app.add_subcommand("gen-data",
                                     "Generate a paired phantom dataset");
  setup_config_file(cmd_gen);
  cmd_gen->add_option("--out", gen.out, "Output directory")->required();
  cmd_gen->add_option("--n-train", gen.n_train, "Training ids");
  cmd_gen->add_option("--n-test", gen.n_test, "Test ids");
  cmd_gen->add_option("--size", gen.size, "Image side length");
  cmd_gen->add_option("--seed", gen.seed, "Dataset seed");
  cmd_gen->add_option("--paired-ratio", gen.paired_ratio,
                      "Fraction of train ids marked paired");
  cmd_gen->callback([&]() {
    log_config_header("gen-data");
    log_kv("out", gen.out);
    log_kv("n_train", std::to_string(gen.n_train));
    log_kv("n_test", std::to_string(gen.n_test));
    log_kv("size", std::to_string(gen.size));
    log_kv("seed", std::to_string(gen.seed));
    log_kv("paired_ratio", std::to_string(gen.paired_ratio));
    DatasetManifest m = generate_dataset(gen.seed, gen.n_train, gen.n_test,
                                         gen.size, gen.out);
    if (gen.paired_ratio < 1.0) {
      m = split_dataset(m, gen.paired_ratio);
      save_manifest(m, fs::path(gen.out) / "manifest.tsv");
    }
    std::cerr << "wrote " << m.entries.size() << " images under " << gen.out
              << "\n";
  });

  // ---- pretrain ----------------------------------------------------------
  struct {
    std::string data;
    std::string out;
    EdgeMaeConfig cfg;
    PretrainConfig tcfg;
  } pre;
  auto* cmd_pre = app.add_subcommand("pretrain",
                                     "Self-supervised edge-aware pretraining");
  setup_config_file(cmd_pre);
  cmd_pre->add_option("--data", pre.data, "Dataset directory")->required();
  cmd_pre->add_option("--out", pre.out, "Checkpoint output directory")
      ->required();
  add_enc_options(cmd_pre, pre.cfg);
  cmd_pre->add_option("--mask-ratio", pre.cfg.mask_ratio, "Masking ratio");
  cmd_pre->add_option("--seed", pre.tcfg.seed, "Training seed");
  cmd_pre->add_option("--epochs", pre.tcfg.epochs, "Epochs");
  cmd_pre->add_option("--stage-switch-epoch", pre.tcfg.stage_switch_epoch,
                      "First stage-2 epoch (0 = epochs/2)");
  cmd_pre->add_option("--lr", pre.tcfg.lr, "Base learning rate");
  cmd_pre->add_option("--batch", pre.tcfg.batch, "Batch size");
  cmd_pre->add_option("--threads", pre.tcfg.threads,
                      "Worker threads (fixed-order gradient reduction)");
  cmd_pre->callback([&]() {
    log_config_header("pretrain");
    log_kv("data", pre.data);
    log_kv("out", pre.out);
    log_kv("image_size", std::to_string(pre.cfg.image_size));
    log_kv("patch_size", std::to_string(pre.cfg.patch_size));
    log_kv("enc", std::to_string(pre.cfg.enc_layers) + " layers x " +
                      std::to_string(pre.cfg.enc_dim) + " dim");
    log_kv("dec", std::to_string(pre.cfg.dec_layers) + " layers x " +
                      std::to_string(pre.cfg.dec_dim) + " dim, " +
                      std::to_string(pre.cfg.dec_shared_layers) + " shared");
    log_kv("mask_ratio", std::to_string(pre.cfg.mask_ratio));
    log_kv("lambda_imp", std::to_string(pre.cfg.lambda_imp));
    log_kv("lambda_edge", std::to_string(pre.cfg.lambda_edge));
    log_kv("seed", std::to_string(pre.tcfg.seed));
    log_kv("epochs", std::to_string(pre.tcfg.epochs));
    log_kv("stage_switch_epoch",
           std::to_string(pre.tcfg.resolved_stage_switch()));
    log_kv("lr", std::to_string(pre.tcfg.lr));
    log_kv("batch", std::to_string(pre.tcfg.batch));
    log_kv("threads", std::to_string(pre.tcfg.threads));
    DatasetManifest m = load_manifest(fs::path(pre.data) / "manifest.tsv");
    auto pool = pretrain_pool(m);
    ParamStore params = init_edge_mae_params(pre.cfg, pre.tcfg.seed);
    pretrain_run(pool, params, pre.cfg, pre.tcfg, &std::cerr);
    save_checkpoint(params, pre.out);
    std::cerr << "checkpoint written to " << pre.out << "\n";
  });

  // ---- finetune ----------------------------------------------------------
  struct {
    std::string data;
    std::string enc;
    std::string out;
    std::string direction = "A2B";
    MtNetConfig cfg;
    FinetuneConfig tcfg;
  } fin;
  auto* cmd_fin = app.add_subcommand(
      "finetune",
      "Fine-tune the multi-scale synthesizer on the paired subset. "
      "Augmentation jitters brightness and contrast of the source image; "
      "sharpness jitter is not implemented.");
  setup_config_file(cmd_fin);
  cmd_fin->add_option("--data", fin.data, "Dataset directory")->required();
  cmd_fin->add_option("--enc", fin.enc, "Pretrained checkpoint directory")
      ->required();
  cmd_fin->add_option("--out", fin.out, "Checkpoint output directory")
      ->required();
  cmd_fin->add_option("--direction", fin.direction, "A2B or B2A");
  cmd_fin->add_option("--base-channels", fin.cfg.base_channels,
                      "Branch base channels");
  cmd_fin->add_option("--window", fin.cfg.window, "Attention window");
  cmd_fin->add_option("--head-dim", fin.cfg.head_dim, "Per-head channels");
  cmd_fin->add_option("--seed", fin.tcfg.seed, "Training seed");
  cmd_fin->add_option("--epochs", fin.tcfg.epochs, "Epochs");
  cmd_fin->add_option("--lr", fin.tcfg.lr, "Base learning rate");
  cmd_fin->add_option("--batch", fin.tcfg.batch, "Batch size");
  cmd_fin->add_option("--paired-ratio", fin.tcfg.paired_ratio,
                      "Fraction of train ids treated as paired");
  cmd_fin->add_option("--freeze-layers", fin.tcfg.freeze_layers,
                      "Frozen leading encoder layers (-1 = enc_layers/2)");
  cmd_fin->add_flag("--augment,!--no-augment", fin.tcfg.augment,
                    "Brightness/contrast jitter of the source image");
  cmd_fin->add_option("--threads", fin.tcfg.threads, "Worker threads");
  cmd_fin->callback([&]() {
    Direction dir = direction_from_string(fin.direction);
    ParamStore pretrained = load_checkpoint(fin.enc);
    EdgeMaeConfig enc_cfg = read_enc_config(pretrained);
    int freeze = fin.tcfg.resolved_freeze(enc_cfg);
    log_config_header("finetune");
    log_kv("data", fin.data);
    log_kv("enc", fin.enc);
    log_kv("out", fin.out);
    log_kv("direction", direction_name(dir));
    log_kv("base_channels", std::to_string(fin.cfg.base_channels));
    log_kv("window", std::to_string(fin.cfg.window));
    log_kv("head_dim", std::to_string(fin.cfg.head_dim));
    log_kv("seed", std::to_string(fin.tcfg.seed));
    log_kv("epochs", std::to_string(fin.tcfg.epochs));
    log_kv("lr", std::to_string(fin.tcfg.lr));
    log_kv("batch", std::to_string(fin.tcfg.batch));
    log_kv("paired_ratio", std::to_string(fin.tcfg.paired_ratio));
    log_kv("freeze_layers", std::to_string(freeze));
    log_kv("augment", fin.tcfg.augment ? "true" : "false");
    log_kv("threads", std::to_string(fin.tcfg.threads));
    DatasetManifest m = load_manifest(fs::path(fin.data) / "manifest.tsv");
    m = split_dataset(m, fin.tcfg.paired_ratio);
    auto pairs = paired_pool(m, dir);
    ParamStore frozen = extract_encoder(pretrained);
    ParamStore tune = make_finetune_store(pretrained, enc_cfg, fin.cfg,
                                          fin.tcfg.seed, freeze);
    finetune_run(pairs, tune, frozen, enc_cfg, fin.cfg, fin.tcfg, &std::cerr);
    save_checkpoint(tune, fin.out);
    std::cerr << "checkpoint written to " << fin.out << "\n";
  });

  // ---- synth -------------------------------------------------------------
  struct {
    std::string model;
    std::string input;
    std::string out;
  } syn;
  auto* cmd_syn = app.add_subcommand("synth",
                                     "Synthesize the other modality of one "
                                     "image");
  setup_config_file(cmd_syn);
  cmd_syn->add_option("--model", syn.model, "Fine-tuned checkpoint directory")
      ->required();
  cmd_syn->add_option("--input", syn.input, "Input image (NTF1)")->required();
  cmd_syn->add_option("--out", syn.out, "Output path prefix")->required();
  cmd_syn->callback([&]() {
    log_config_header("synth");
    log_kv("model", syn.model);
    log_kv("input", syn.input);
    log_kv("out", syn.out);
    ParamStore model = load_checkpoint(syn.model);
    EdgeMaeConfig enc_cfg = read_enc_config(model);
    MtNetConfig mt_cfg = read_mt_config(model, enc_cfg);
    Image src = Image::from_tensor(ntf_read(syn.input));
    Image out = synthesize(src, model, enc_cfg, mt_cfg);
    ntf_write(syn.out + ".ntf", out.to_tensor());
    write_pgm(syn.out + ".pgm", out);
    std::cerr << "wrote " << syn.out << ".ntf and .pgm\n";
  });

  // ---- eval --------------------------------------------------------------
  struct {
    std::string data;
    std::string model;
    std::string direction = "A2B";
    std::string out;
    std::string detector;
  } ev;
  auto* cmd_eval = app.add_subcommand("eval",
                                      "Score the test split (PSNR/NMSE/SSIM)");
  setup_config_file(cmd_eval);
  cmd_eval->add_option("--data", ev.data, "Dataset directory")->required();
  cmd_eval->add_option("--model", ev.model, "Fine-tuned checkpoint directory")
      ->required();
  cmd_eval->add_option("--direction", ev.direction, "A2B or B2A");
  cmd_eval->add_option("--out", ev.out, "CSV output path")->required();
  cmd_eval->add_option("--edge-detector", ev.detector,
                       "Also score detector(yhat) vs detector(y): "
                       "sobel|prewitt");
  cmd_eval->callback([&]() {
    log_config_header("eval");
    log_kv("data", ev.data);
    log_kv("model", ev.model);
    log_kv("direction", ev.direction);
    log_kv("out", ev.out);
    log_kv("edge_detector", ev.detector.empty() ? "(none)" : ev.detector);
    ParamStore model = load_checkpoint(ev.model);
    EdgeMaeConfig enc_cfg = read_enc_config(model);
    MtNetConfig mt_cfg = read_mt_config(model, enc_cfg);
    DatasetManifest m = load_manifest(fs::path(ev.data) / "manifest.tsv");
    std::optional<EdgeDetector> det;
    if (!ev.detector.empty()) det = edge_detector_from_string(ev.detector);
    MetricsReport rep = evaluate_set(m, model, enc_cfg, mt_cfg,
                                     direction_from_string(ev.direction), det);
    std::ofstream os(ev.out, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + ev.out);
    write_csv(os, rep);
    std::cerr << "report written to " << ev.out << "\n";
    if (rep.any_error()) throw IoError("eval finished with per-row errors");
  });

  // ---- impute ------------------------------------------------------------
  struct {
    std::string model;
    std::string input;
    std::string out;
    double ratio = 0.0;  // 0 = checkpoint default
    uint64_t seed = 7;
  } imp;
  auto* cmd_imp = app.add_subcommand(
      "impute", "Mask one image and write the masked input, the imputed "
                "image and the estimated edge map as PGM files");
  setup_config_file(cmd_imp);
  cmd_imp->add_option("--model", imp.model, "Pretrained checkpoint directory")
      ->required();
  cmd_imp->add_option("--input", imp.input, "Input image (NTF1)")->required();
  cmd_imp->add_option("--out", imp.out, "Output path prefix")->required();
  cmd_imp->add_option("--mask-ratio", imp.ratio,
                      "Masking ratio (default: checkpoint value)");
  cmd_imp->add_option("--seed", imp.seed, "Mask seed");
  cmd_imp->callback([&]() {
    log_config_header("impute");
    log_kv("model", imp.model);
    log_kv("input", imp.input);
    log_kv("out", imp.out);
    log_kv("seed", std::to_string(imp.seed));
    ParamStore model = load_checkpoint(imp.model);
    EdgeMaeConfig cfg = read_enc_config(model);
    double ratio = imp.ratio > 0.0 ? imp.ratio : cfg.mask_ratio;
    log_kv("mask_ratio", std::to_string(ratio));
    Image src = Image::from_tensor(ntf_read(imp.input));
    Rng rng(imp.seed);
    MaskPlan mask = sample_mask(cfg.grid(), cfg.grid(), ratio, rng);
    MaeForward fwd = mae_forward(src, mask, model, cfg);
    Image masked = src;
    for (int i = 0; i < src.h; ++i)
      for (int j = 0; j < src.w; ++j)
        if (mask.masked(i / cfg.patch_size, j / cfg.patch_size))
          masked.at(i, j) = 0.5;
    write_pgm(imp.out + "_masked.pgm", masked);
    write_pgm(imp.out + "_imputed.pgm", fwd.imputed);
    write_pgm(imp.out + "_edge.pgm", fwd.edge);
    std::cerr << "wrote " << imp.out << "_{masked,imputed,edge}.pgm\n";
  });

  // ---- grad-check --------------------------------------------------------
  struct {
    bool micro = false;
    double tol = 1e-4;
    double step = 1e-3;
    uint64_t seed = 7;
  } gc;
  auto* cmd_gc = app.add_subcommand(
      "grad-check", "Verify analytic gradients of the pretraining (both "
                    "stages) and fine-tuning losses against central finite "
                    "differences on the micro models");
  setup_config_file(cmd_gc);
  cmd_gc->add_flag("--micro", gc.micro, "Use the micro configs (required)");
  cmd_gc->add_option("--tol", gc.tol, "Max relative error accepted");
  cmd_gc->add_option("--step", gc.step, "Finite-difference step");
  cmd_gc->add_option("--seed", gc.seed, "Fixture seed");
  cmd_gc->callback([&]() {
    if (!gc.micro)
      throw ConfigError("grad-check requires --micro (only the micro "
                        "configuration is supported)");
    log_config_header("grad-check");
    log_kv("tol", std::to_string(gc.tol));
    log_kv("step", std::to_string(gc.step));
    log_kv("seed", std::to_string(gc.seed));
    bool ok = true;
    for (const auto& report : {grad_check_pretrain(1, gc.seed),
                               grad_check_pretrain(2, gc.seed),
                               grad_check_finetune(gc.seed)}) {
      std::cout << report.label << ": max relative error " << report.worst
                << (report.pass(gc.tol) ? " (pass)" : " (FAIL)") << "\n";
      for (const auto& name : report.offenders(gc.tol))
        std::cout << "  offender: " << name << "\n";
      ok = ok && report.pass(gc.tol);
    }
    if (!ok) throw CheckError("gradient check failed");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
