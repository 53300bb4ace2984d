// Copyright (C) 2026 The fpfixed Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

// Command-line front end. run() never throws; errors map to exit codes:
// 0 ok, 2 usage, 3 validation or format, 4 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fpfixed/fpfixed.hpp"

namespace fpfixed::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitRuntime = 4;

namespace detail {

inline void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
        throw ValidationError(std::string(what) + " not found: " + p.string());
    }
}

inline void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) {
        throw ValidationError(std::string(what) + " is not a directory: " + p.string());
    }
}

inline void require_parent(const fs::path& p) {
    const auto parent = p.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw ValidationError("output directory does not exist: " + parent.string());
    }
}

// Templates are named <id>__<anything>.fpt; a name without "__" is its own id.
inline std::string id_from_stem(const fs::path& p) {
    const auto stem = p.stem().string();
    const auto cut = stem.find("__");
    return cut == std::string::npos ? stem : stem.substr(0, cut);
}

inline std::vector<fs::path> list_templates(const fs::path& dir) {
    require_dir(dir, "template directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".fpt") {
            out.push_back(e.path());
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) {
        throw ValidationError("no .fpt files in " + dir.string());
    }
    return out;
}

inline void emit_json(const nlohmann::json& j, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        require_parent(out_path);
        fpfixed::detail::write_file_atomic(out_path, j.dump(2) + "\n");
    }
}

// Config file first, then --set overrides, then dedicated flags.
inline void load_net_config(const std::string& config_path, const std::vector<std::string>& sets, net::NetConfig& n,
                            net::TrainConfig& t) {
    if (!config_path.empty()) {
        require_file(config_path, "config file");
        const auto bytes = fpfixed::detail::read_file(config_path);
        net::apply_key_values(std::string(bytes.begin(), bytes.end()), n, t);
    }
    for (const auto& s : sets) {
        net::apply_key_values(s, n, t);
    }
}

inline std::vector<net::LabeledImage> labeled_train_split(const Dataset& ds) {
    std::vector<net::LabeledImage> data;
    for (const auto& imp : ds.train) {
        data.push_back({imp.image, imp.minutiae, imp.label});
    }
    return data;
}

inline std::string loss_csv_header() { return "epoch,total,ce1,ce2,map,decay\n"; }

}  // namespace detail

inline int run(int argc, char** argv) {
    CLI::App app{"Fixed-length fingerprint templates: data, training, extraction, search, evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "fpfixed 0.1.0");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Write a seeded synthetic dataset");
    std::string gen_out;
    int gen_classes = 20, gen_imps = 8, gen_size = 64;
    std::uint64_t gen_seed = 1;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--classes", gen_classes, "Number of identities");
    gen->add_option("--impressions", gen_imps, "Impressions per identity (last one is held out)");
    gen->add_option("--size", gen_size, "Image side in pixels");
    gen->add_option("--seed", gen_seed, "Generator seed");

    // train
    auto* tr = app.add_subcommand("train", "Train the two-branch network on a dataset");
    std::string tr_data, tr_out, tr_config, tr_curve;
    std::vector<std::string> tr_sets;
    int tr_epochs = -1;
    std::uint64_t tr_seed = 0;
    bool tr_localizer = false;
    tr->add_option("--data", tr_data, "Dataset directory from gen-data")->required();
    tr->add_option("--out", tr_out, "Checkpoint path")->required();
    tr->add_option("--config", tr_config, "key = value config file");
    tr->add_option("--set", tr_sets, "Config override key=value (repeatable)");
    tr->add_option("--epochs", tr_epochs, "Epoch count");
    auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "Training seed");
    tr->add_flag("--localizer", tr_localizer, "Enable the localization head");
    tr->add_option("--curve", tr_curve, "Loss curve CSV path");

    // distill
    auto* di = app.add_subcommand("distill", "Train a smaller student to regress teacher templates");
    std::string di_teacher, di_data, di_out, di_config, di_curve;
    std::vector<std::string> di_sets;
    int di_epochs = -1;
    std::uint64_t di_seed = 0;
    di->add_option("--teacher", di_teacher, "Teacher checkpoint")->required();
    di->add_option("--data", di_data, "Dataset directory")->required();
    di->add_option("--out", di_out, "Student checkpoint path")->required();
    di->add_option("--config", di_config, "Student config file (starts from the teacher's config)");
    di->add_option("--set", di_sets, "Student config override key=value (repeatable)");
    di->add_option("--epochs", di_epochs, "Epoch count");
    auto* di_seed_opt = di->add_option("--seed", di_seed, "Shuffle seed");
    di->add_option("--curve", di_curve, "Loss curve CSV path");

    // extract
    auto* ex = app.add_subcommand("extract", "Image(s) to .fpt templates with a trained checkpoint");
    std::string ex_model, ex_image, ex_out, ex_dataset, ex_out_dir, ex_split = "all";
    ex->add_option("--model", ex_model, "Checkpoint")->required();
    auto* ex_img_opt = ex->add_option("--image", ex_image, "Single input image (PGM or PNG)");
    ex->add_option("--out", ex_out, "Output .fpt for --image");
    auto* ex_ds_opt = ex->add_option("--dataset", ex_dataset, "Dataset directory");
    ex->add_option("--out-dir", ex_out_dir, "Output directory for --dataset");
    ex->add_option("--split", ex_split, "train | eval | gallery (first impression per class) | all")
        ->check(CLI::IsMember({"train", "eval", "gallery", "all"}));
    ex_img_opt->excludes(ex_ds_opt);

    // encode-map
    auto* em = app.add_subcommand("encode-map", "Minutiae text file to a map dump");
    std::string em_in, em_out;
    MapConfig em_cfg;
    em->add_option("--mnt", em_in, "Input .mnt file")->required();
    em->add_option("--out", em_out, "Output map dump")->required();
    em->add_option("--map-h", em_cfg.h_map, "Map rows");
    em->add_option("--map-w", em_cfg.w_map, "Map columns");
    em->add_option("--map-c", em_cfg.c, "Orientation channels");
    em->add_option("--sigma-s", em_cfg.sigma_s, "Spatial bandwidth in map cells");
    em->add_option("--sigma-o", em_cfg.sigma_o, "Orientation bandwidth");
    em->add_option("--truncation", em_cfg.truncation_radius, "Truncation radius in sigma_s (<= 0: exact)");

    // align
    auto* al = app.add_subcommand("align", "Crop-and-align an image with bounded affine parameters");
    std::string al_in, al_out, al_params_out;
    double al_tx = 0, al_ty = 0, al_theta = 0;
    int al_size = 0;
    std::string al_padding = "zero";
    al->add_option("--image", al_in, "Input image")->required();
    al->add_option("--out", al_out, "Output image")->required();
    al->add_option("--tx", al_tx, "Horizontal translation (pixels)");
    al->add_option("--ty", al_ty, "Vertical translation (pixels)");
    al->add_option("--theta", al_theta, "Rotation (radians)");
    al->add_option("--size", al_size, "Output side (default: input width)");
    al->add_option("--padding", al_padding, "zero | clamp")->check(CLI::IsMember({"zero", "clamp"}));
    al->add_option("--params-out", al_params_out, "Write the clamped parameters JSON here instead of stdout");

    // enroll
    auto* en = app.add_subcommand("enroll", "Pack a directory of templates into a gallery");
    std::string en_gallery, en_dir;
    en->add_option("--gallery", en_gallery, "Output gallery file")->required();
    en->add_option("--templates", en_dir, "Directory of <id>__*.fpt files")->required();

    // search
    auto* se = app.add_subcommand("search", "Top-k search of one probe");
    std::string se_gallery, se_probe;
    std::size_t se_k = 10;
    unsigned se_threads = 0;
    bool se_json = false;
    se->add_option("--gallery", se_gallery, "Gallery file")->required();
    se->add_option("--probe", se_probe, "Probe .fpt")->required();
    se->add_option("-k", se_k, "Number of results")->check(CLI::PositiveNumber);
    se->add_option("--threads", se_threads, "Worker threads (0: all cores)");
    se->add_flag("--json", se_json, "JSON output");

    // verify-eval
    auto* ve = app.add_subcommand("verify-eval", "All-pairs verification: TAR at FAR levels");
    std::string ve_dir, ve_out;
    std::vector<double> ve_far = default_far_levels();
    ve->add_option("--templates", ve_dir, "Directory of <id>__*.fpt files")->required();
    ve->add_option("--far", ve_far, "FAR levels");
    ve->add_option("--out", ve_out, "JSON report path (default stdout)");

    // search-eval
    auto* sv = app.add_subcommand("search-eval", "Identification CMC of probes against a gallery");
    std::string sv_gallery, sv_probes, sv_out;
    std::size_t sv_rank = 0;
    sv->add_option("--gallery", sv_gallery, "Gallery file")->required();
    sv->add_option("--probes", sv_probes, "Directory of <id>__*.fpt probes")->required();
    sv->add_option("--max-rank", sv_rank, "CMC length (0: gallery size)");
    sv->add_option("--out", sv_out, "JSON report path (default stdout)");

    // bench
    auto* be = app.add_subcommand("bench", "Exhaustive matching throughput");
    std::string be_gallery, be_out;
    std::size_t be_probes = 100, be_reps = 1;
    unsigned be_threads = 0;
    std::uint64_t be_seed = 1;
    be->add_option("--gallery", be_gallery, "Gallery file")->required();
    be->add_option("--probes", be_probes, "Number of random probe templates")->check(CLI::PositiveNumber);
    be->add_option("--reps", be_reps, "Repetitions")->check(CLI::PositiveNumber);
    be->add_option("--threads", be_threads, "Threads for the multi-thread figure (0: all cores)");
    be->add_option("--seed", be_seed, "Probe seed");
    be->add_flag("--json", "JSON output (default)");
    be->add_option("--out", be_out, "JSON report path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) {
            if (gen_size < 8) {
                throw ValidationError("--size must be >= 8");
            }
            SynthConfig cfg;
            cfg.width = cfg.height = gen_size;
            const auto ds = make_dataset(gen_classes, gen_imps, gen_seed, cfg);
            write_dataset(gen_out, ds);
            std::cerr << "wrote " << ds.train.size() << " train + " << ds.eval.size() << " eval impressions to "
                      << gen_out << "\n";
        } else if (*tr) {
            detail::require_dir(tr_data, "dataset");
            detail::require_parent(tr_out);
            const auto ds = read_dataset(tr_data);
            net::NetConfig n;
            net::TrainConfig t;
            n.num_classes = ds.num_classes;
            n.in_h = ds.config.height;
            n.in_w = ds.config.width;
            detail::load_net_config(tr_config, tr_sets, n, t);
            if (tr_epochs >= 0) t.epochs = tr_epochs;
            if (*tr_seed_opt) t.seed = tr_seed;
            if (tr_localizer) n.use_localizer = true;
            if (n.num_classes < ds.num_classes) {
                throw ValidationError("num_classes is smaller than the dataset's class count");
            }
            std::string curve = detail::loss_csv_header();
            const auto result = net::train(detail::labeled_train_split(ds), n, t, [&](int e, const net::LossBreakdown& l) {
                std::ostringstream row;
                row.precision(9);
                row << e << "," << l.total << "," << l.ce1 << "," << l.ce2 << "," << l.map << "," << l.decay << "\n";
                curve += row.str();
                std::cerr << "epoch " << e << " loss " << l.total << "\n";
            });
            net::save_checkpoint(tr_out, n, result.params);
            if (!tr_curve.empty()) {
                detail::require_parent(tr_curve);
                fpfixed::detail::write_file_atomic(tr_curve, curve);
            }
        } else if (*di) {
            detail::require_file(di_teacher, "teacher checkpoint");
            detail::require_dir(di_data, "dataset");
            detail::require_parent(di_out);
            const auto [tcfg, teacher] = net::load_checkpoint(di_teacher);
            const auto ds = read_dataset(di_data);
            net::NetConfig s = tcfg;
            net::TrainConfig t;
            detail::load_net_config(di_config, di_sets, s, t);
            if (di_epochs >= 0) t.epochs = di_epochs;
            if (*di_seed_opt) t.seed = di_seed;
            std::vector<GrayImage> images;
            for (const auto& imp : ds.train) images.push_back(imp.image);
            std::string curve = "epoch,loss\n";
            const auto result = net::distill(teacher, tcfg, s, images, t, nullptr, [&](int e, double l) {
                std::ostringstream row;
                row.precision(9);
                row << e << "," << l << "\n";
                curve += row.str();
                std::cerr << "epoch " << e << " loss " << l << "\n";
            });
            net::save_checkpoint(di_out, s, result.params);
            if (!di_curve.empty()) {
                detail::require_parent(di_curve);
                fpfixed::detail::write_file_atomic(di_curve, curve);
            }
        } else if (*ex) {
            detail::require_file(ex_model, "checkpoint");
            if (ex_image.empty() == ex_dataset.empty()) {
                throw CLI::ValidationError("extract", "give exactly one of --image or --dataset");
            }
            const auto [cfg, params] = net::load_checkpoint(ex_model);
            if (!ex_image.empty()) {
                if (ex_out.empty()) throw CLI::ValidationError("extract", "--image requires --out");
                detail::require_file(ex_image, "image");
                detail::require_parent(ex_out);
                write_template(ex_out, net::extract_embedding(params, cfg, read_image(ex_image)));
            } else {
                if (ex_out_dir.empty()) throw CLI::ValidationError("extract", "--dataset requires --out-dir");
                detail::require_dir(ex_dataset, "dataset");
                const auto ds = read_dataset(ex_dataset);
                fs::create_directories(ex_out_dir);
                std::size_t written = 0;
                auto emit = [&](const Impression& imp) {
                    const auto name = class_dir_name(imp.label) + "__" + impression_stem(imp.impression_index) + ".fpt";
                    write_template(fs::path(ex_out_dir) / name, net::extract_embedding(params, cfg, imp.image));
                    ++written;
                };
                for (const auto& imp : ds.train) {
                    if (ex_split == "train" || ex_split == "all" || (ex_split == "gallery" && imp.impression_index == 0)) {
                        emit(imp);
                    }
                }
                if (ex_split == "eval" || ex_split == "all") {
                    for (const auto& imp : ds.eval) emit(imp);
                }
                std::cerr << "wrote " << written << " templates to " << ex_out_dir << "\n";
            }
        } else if (*em) {
            detail::require_file(em_in, "minutiae file");
            detail::require_parent(em_out);
            fpfixed::detail::write_file_atomic(em_out, serialize_map(encode_map(read_mnt(em_in), em_cfg)));
        } else if (*al) {
            detail::require_file(al_in, "image");
            detail::require_parent(al_out);
            const auto img = read_image(al_in);
            // Bounds scale with the input width from the 448 px reference.
            const double k = img.w / 448.0;
            const AlignmentBounds bounds{224.0 * k, std::numbers::pi / 3.0, 285.0 * k};
            const auto p = clamp_params(al_tx, al_ty, al_theta, bounds);
            const int side = al_size > 0 ? al_size : img.w;
            const auto pad = al_padding == "clamp" ? Padding::kClampToEdge : Padding::kZero;
            write_image(al_out, align_image(img, p, side, side, pad));
            detail::emit_json({{"tx", p.tx}, {"ty", p.ty}, {"theta", p.theta}, {"window", p.window},
                               {"out_h", side}, {"out_w", side}},
                              al_params_out);
        } else if (*en) {
            detail::require_parent(en_gallery);
            std::vector<std::pair<std::string, FixedTemplate>> rows;
            for (const auto& p : detail::list_templates(en_dir)) {
                rows.emplace_back(detail::id_from_stem(p), read_template(p));
            }
            const auto g = build_gallery(rows);
            write_gallery(en_gallery, g);
            std::cerr << "enrolled " << g.size() << " templates of dim " << g.dim() << "\n";
        } else if (*se) {
            detail::require_file(se_gallery, "gallery");
            detail::require_file(se_probe, "probe");
            const auto g = read_gallery(se_gallery);
            const unsigned threads = se_threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : se_threads;
            const auto result = search(g, read_template(se_probe), se_k, threads);
            if (se_json) {
                nlohmann::json j = nlohmann::json::array();
                for (std::size_t r = 0; r < result.hits.size(); ++r) {
                    j.push_back({{"rank", r + 1}, {"id", result.hits[r].id}, {"score", result.hits[r].score}});
                }
                std::cout << nlohmann::json{{"results", j}}.dump(2) << "\n";
            } else {
                for (std::size_t r = 0; r < result.hits.size(); ++r) {
                    std::cout << r + 1 << "\t" << result.hits[r].id << "\t" << result.hits[r].score << "\n";
                }
            }
        } else if (*ve) {
            std::vector<std::pair<std::string, FixedTemplate>> all;
            for (const auto& p : detail::list_templates(ve_dir)) {
                all.emplace_back(detail::id_from_stem(p), read_template(p));
            }
            std::vector<double> genuine, imposter;
            for (std::size_t i = 0; i < all.size(); ++i) {
                for (std::size_t j = i + 1; j < all.size(); ++j) {
                    const double s = match_score(all[i].second, all[j].second);
                    (all[i].first == all[j].first ? genuine : imposter).push_back(s);
                }
            }
            detail::emit_json(to_json(eval_verification(genuine, imposter, ve_far)), ve_out);
        } else if (*sv) {
            detail::require_file(sv_gallery, "gallery");
            const auto g = read_gallery(sv_gallery);
            std::vector<std::pair<std::string, FixedTemplate>> probes;
            for (const auto& p : detail::list_templates(sv_probes)) {
                probes.emplace_back(detail::id_from_stem(p), read_template(p));
            }
            detail::emit_json(to_json(eval_search(probes, g, sv_rank)), sv_out);
        } else if (*be) {
            detail::require_file(be_gallery, "gallery");
            const auto g = read_gallery(be_gallery);
            Rng rng(be_seed);
            std::vector<FixedTemplate> probes;
            for (std::size_t i = 0; i < be_probes; ++i) {
                std::vector<float> v(g.dim());
                for (auto& x : v) x = static_cast<float>(rng.normal());
                const double n = fpfixed::detail::norm_f64(v);
                for (auto& x : v) x = static_cast<float>(x / n);
                probes.push_back(FixedTemplate::from_unit(std::move(v), g.dim() / 2));
            }
            detail::emit_json(to_json(benchmark(g, probes, be_reps, be_threads)), be_out);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DomainError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace fpfixed::cli
