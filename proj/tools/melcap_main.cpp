// Copyright 2026 The MelCap Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "melcap/cli.hpp"
#include "melcap/melcap.hpp"

namespace {

// Exit codes: 0 success, 1 validation error, 2 I/O error.
int run(int argc, char** argv) {
  CLI::App app{"melcap — mel-spectrogram patch-VQ audio codec"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run configuration file")->capture_default_str();
  std::uint64_t seed_override = 0;
  bool have_seed = false;
  app.add_option("--seed", seed_override, "override every seed in the config")
      ->each([&have_seed](const std::string&) { have_seed = true; });
  std::size_t jobs = 1;
  app.add_option("--jobs", jobs, "worker threads for eval/train scans")->capture_default_str();
  bool force_mismatch = false;
  app.add_flag("--force-mismatch", force_mismatch,
               "downgrade codebook/config fingerprint mismatches to warnings");

  // train-codebook
  auto* train = app.add_subcommand("train-codebook", "fit a codebook on a WAV corpus");
  std::string train_corpus, train_out = "codebook.mcbk";
  train->add_option("corpus", train_corpus, "directory scanned recursively for *.wav")
      ->required();
  train->add_option("--output", train_out, "codebook file to write")->capture_default_str();

  // encode
  auto* enc = app.add_subcommand("encode", "encode a WAV into discrete tokens");
  std::string enc_wav, enc_cb, enc_out = "tokens.mcap";
  enc->add_option("wav", enc_wav, "input WAV")->required();
  enc->add_option("--codebook", enc_cb, "codebook file")->required();
  enc->add_option("--output", enc_out, "token file to write")->capture_default_str();

  // decode
  auto* dec = app.add_subcommand("decode", "decode tokens back to a log-mel matrix");
  std::string dec_tokens, dec_cb, dec_out = "logmel.csv";
  dec->add_option("tokens", dec_tokens, "token file")->required();
  dec->add_option("--codebook", dec_cb, "codebook file")->required();
  dec->add_option("--output", dec_out, "log-mel CSV to write")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a waveform from tokens or a WAV");
  std::string synth_in, synth_cb, synth_out = "synth.wav";
  synth->add_option("input", synth_in, "token file or WAV")->required();
  synth->add_option("--codebook", synth_cb, "codebook file (required for token input)");
  synth->add_option("--output", synth_out, "output WAV (32-bit float)")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "objective metrics over matched WAV directories");
  std::string eval_ref, eval_deg, eval_out = "metrics.csv";
  eval->add_option("reference", eval_ref, "reference WAV directory")->required();
  eval->add_option("degraded", eval_deg, "degraded WAV directory")->required();
  eval->add_option("--output", eval_out, "metrics CSV to write")->capture_default_str();

  // verify-theory
  auto* verify = app.add_subcommand("verify-theory", "run the error-propagation checks");
  std::string verify_out = "theory_report";
  std::size_t verify_trials = 1000, verify_clips = 100;
  verify->add_option("--output", verify_out, "report prefix (.txt and .csv)")
      ->capture_default_str();
  verify->add_option("--trials", verify_trials, "spectrogram pairs for the operator check")
      ->capture_default_str();
  verify->add_option("--clips", verify_clips, "corpus clips for the bounded-error check")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  melcap::RunConfig cfg;
  if (!config_path.empty()) cfg = melcap::load_run_config(config_path);
  if (have_seed) {
    cfg.seed_codebook = seed_override;
    cfg.seed_vocoder = seed_override + 1;
    cfg.seed_theory = seed_override + 2;
  }

  if (train->parsed()) {
    melcap::cli::cmd_train_codebook(train_corpus, cfg, train_out, jobs);
  } else if (enc->parsed()) {
    melcap::cli::cmd_encode(enc_wav, enc_cb, cfg, enc_out, force_mismatch);
  } else if (dec->parsed()) {
    melcap::cli::cmd_decode(dec_tokens, dec_cb, cfg, dec_out, force_mismatch);
  } else if (synth->parsed()) {
    melcap::cli::cmd_synth(synth_in, synth_cb, cfg, synth_out, force_mismatch);
  } else if (eval->parsed()) {
    return melcap::cli::cmd_eval(eval_ref, eval_deg, cfg, eval_out, jobs);
  } else if (verify->parsed()) {
    return melcap::cli::cmd_verify_theory(cfg, verify_out, verify_trials, verify_clips, jobs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const melcap::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
