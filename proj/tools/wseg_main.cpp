#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>
#include <string>
#include <vector>

#include "wseg/checkpoint.hpp"
#include "wseg/dataset.hpp"
#include "wseg/imaging.hpp"
#include "wseg/metrics.hpp"
#include "wseg/model.hpp"
#include "wseg/postprocess.hpp"
#include "wseg/synthgen.hpp"
#include "wseg/threading.hpp"
#include "wseg/train.hpp"

namespace fs = std::filesystem;
using namespace wseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;    // input/validation problems
constexpr int kExitRuntime = 3;  // runtime and format failures

bool has_image_extension(const fs::path& p) {
    auto ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ArgumentError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    SynthSpec spec;
    int n = 250;
    std::string out;
};

int cmd_synth(const SynthArgs& args) {
    const auto rows = generate_dataset(args.spec, args.n, args.out);
    int train_count = 0;
    for (const auto& r : rows) train_count += r.split == "train" ? 1 : 0;
    std::cout << "wrote " << rows.size() << " samples (" << train_count << " train, "
              << rows.size() - static_cast<std::size_t>(train_count) << " val) under " << args.out
              << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ prepare

struct PrepareArgs {
    std::string images;
    std::string bboxes;
    std::string masks;
    std::string out;
    int size = 224;
    int margin = 0;
    bool derive_bboxes = false;
};

struct PrepareRow {
    std::string filename;
    BBox box;
    std::string tag;  // provenance for error messages
};

std::vector<PrepareRow> read_bbox_csv(const std::string& path) {
    std::ifstream csv(path);
    if (!csv) throw ArgumentError("cannot open bbox csv " + path);
    std::string line;
    if (!std::getline(csv, line)) throw FormatError("bbox csv is empty");
    {
        const auto header = split_csv_line(line);
        if (header.size() < 5 || header[0] != "filename" || header[1] != "x_min" ||
            header[2] != "y_min" || header[3] != "x_max" || header[4] != "y_max") {
            throw FormatError("bbox csv header must be filename,x_min,y_min,x_max,y_max");
        }
    }
    std::vector<PrepareRow> rows;
    int row_no = 1;
    while (std::getline(csv, line)) {
        ++row_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string tag = "bbox csv row " + std::to_string(row_no);
        if (fields.size() < 5) throw ArgumentError(tag + ": expected 5 fields");
        BBox box;
        try {
            box = {std::stoi(fields[1]), std::stoi(fields[2]), std::stoi(fields[3]),
                   std::stoi(fields[4])};
        } catch (...) {
            throw ArgumentError(tag + ": coordinates are not integers");
        }
        rows.push_back({fields[0], box, tag});
    }
    return rows;
}

// Stand-in for an object localizer: tight bounding boxes from the annotation
// masks themselves.
std::vector<PrepareRow> derive_bboxes_from_masks(const std::string& masks_dir) {
    std::vector<PrepareRow> rows;
    for (const auto& file : list_images(masks_dir)) {
        const BinaryMask mask = threshold_mask(decode_gray(file));
        const auto box = mask_to_bbox(mask);
        if (!box) continue;  // empty annotation: nothing to localize
        rows.push_back({file.filename().string(), *box, "derived bbox for " +
                        file.filename().string()});
    }
    return rows;
}

int cmd_prepare(const PrepareArgs& args) {
    if (args.derive_bboxes && args.masks.empty()) {
        throw ArgumentError("--derive-bboxes needs --masks");
    }
    if (!args.derive_bboxes && args.bboxes.empty()) {
        throw ArgumentError("either --bboxes or --derive-bboxes is required");
    }
    const std::vector<PrepareRow> rows = args.derive_bboxes
                                             ? derive_bboxes_from_masks(args.masks)
                                             : read_bbox_csv(args.bboxes);
    if (rows.empty()) throw ArgumentError("no bounding boxes to prepare");

    fs::create_directories(fs::path(args.out) / "images");
    const bool with_masks = !args.masks.empty();
    if (with_masks) fs::create_directories(fs::path(args.out) / "masks");

    std::ostringstream manifest;
    manifest << "image,mask,split,src,crop_x,crop_y,crop_w,crop_h,offset_x,offset_y,"
                "resized_w,resized_h\n";

    int written = 0;
    for (std::size_t index = 0; index < rows.size(); ++index) {
        const auto& [filename, box, row_tag] = rows[index];
        const fs::path src = fs::path(args.images) / filename;
        if (!fs::exists(src)) {
            throw ArgumentError(row_tag + ": missing image file " + src.string());
        }
        const ImageRGB image = decode_image(src);
        try {
            validate_bbox(box, image.width, image.height);
        } catch (const ArgumentError& e) {
            throw ArgumentError(row_tag + ": " + e.what());
        }

        // clamped crop rectangle, recorded for invertibility
        const int cx0 = std::max(0, box.x_min - args.margin);
        const int cy0 = std::max(0, box.y_min - args.margin);
        const int cx1 = std::min(image.width - 1, box.x_max + args.margin);
        const int cy1 = std::min(image.height - 1, box.y_max + args.margin);
        const ImageRGB patch = crop_bbox(image, {cx0, cy0, cx1, cy1}, 0);
        PadPlacement place;
        const ImageRGB prepared = pad_to_square(patch, args.size, &place);

        std::ostringstream stem;
        stem << std::setw(4) << std::setfill('0') << index << "_"
             << fs::path(filename).stem().string();
        const std::string image_rel = "images/" + stem.str() + ".png";
        encode_image(prepared, fs::path(args.out) / image_rel);

        std::string mask_rel;
        if (with_masks) {
            fs::path mask_src = fs::path(args.masks) / filename;
            if (!fs::exists(mask_src)) {
                mask_src = fs::path(args.masks) / (fs::path(filename).stem().string() + ".png");
            }
            if (!fs::exists(mask_src)) {
                mask_src = fs::path(args.masks) / (fs::path(filename).stem().string() + ".pgm");
            }
            if (!fs::exists(mask_src)) {
                throw ArgumentError(row_tag + ": missing mask for " + filename);
            }
            const BinaryMask mask = threshold_mask(decode_gray(mask_src));
            if (mask.width != image.width || mask.height != image.height) {
                throw ArgumentError(row_tag + ": mask dims differ from image dims");
            }
            const BinaryMask mpatch = crop_bbox(mask, {cx0, cy0, cx1, cy1}, 0);
            const BinaryMask mprep = pad_to_square(mpatch, args.size, nullptr);
            mask_rel = "masks/" + stem.str() + ".png";
            encode_gray(gray_from_mask(mprep), fs::path(args.out) / mask_rel);
        }

        const std::string split = (splitmix64(index) % 100) < 20 ? "val" : "train";
        manifest << image_rel << "," << mask_rel << "," << split << "," << filename << "," << cx0
                 << "," << cy0 << "," << cx1 - cx0 + 1 << "," << cy1 - cy0 + 1 << ","
                 << place.offset_x << "," << place.offset_y << "," << place.resized_w << ","
                 << place.resized_h << "\n";
        ++written;
    }
    write_text(fs::path(args.out) / "manifest.csv", manifest.str());
    std::cout << "prepared " << written << " patches under " << args.out << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    std::string data;
    std::string out;
    ModelConfig config;
    TrainOptions options;
    int threads = 0;
    bool describe = false;
};

int cmd_train(TrainArgs& args) {
    args.config.encoder_block_spec = ModelConfig::default_encoder_spec(args.config.expansion_ratio);
    if (args.describe) {
        Model model(args.config, args.options.seed);
        std::cout << model.describe();
        return kExitOk;
    }
    if (args.data.empty()) throw ArgumentError("--data is required to train");
    if (args.out.empty()) throw ArgumentError("--out is required to train");

    const Dataset dataset = load_dataset(args.data);
    if (dataset.train.empty()) throw ConfigError("dataset has no train split");
    if (dataset.val.empty()) throw ConfigError("dataset has no val split");
    for (const auto& pair : dataset.train) {
        if (pair.image.width != args.config.input_size) {
            throw ConfigError("dataset image size " + std::to_string(pair.image.width) +
                              " does not match --input-size " +
                              std::to_string(args.config.input_size));
        }
    }

    Model model(args.config, args.options.seed);
    std::cout << "trainable parameters: " << model.count_parameters() << "\n";
    std::cout << "training on " << dataset.train.size() << " samples, validating on "
              << dataset.val.size() << std::endl;

    fs::create_directories(args.out);
    std::ofstream log_file(fs::path(args.out) / "training_log.csv");
    if (!log_file) throw IoError("cannot write training log under " + args.out);
    log_file << training_log_header();
    args.options.on_epoch = [&](const TrainLogRow& row) {
        log_file << training_log_row(row);
        log_file.flush();
        std::cout << "epoch " << row.epoch << ": loss " << row.loss << ", train dice "
                  << row.train_dice << ", val dice " << row.val_dice << std::endl;
    };

    const FitResult result = fit(model, dataset.train, dataset.val, args.options);
    save_checkpoint(model, fs::path(args.out) / "checkpoint.wseg", result.best_epoch,
                    result.best_val_dice);

    if (result.early_stopped) {
        std::cout << "early stopping at epoch " << result.epochs_run << " (no val dice "
                  << "improvement for more than " << args.options.patience << " epochs)\n";
    } else {
        std::cout << "reached max epochs (" << result.epochs_run << ")\n";
    }
    std::cout << "best epoch " << result.best_epoch << ", val dice " << result.best_val_dice
              << "\n";
    std::cout << "checkpoint: " << (fs::path(args.out) / "checkpoint.wseg").string() << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ predict

struct PredictArgs {
    std::string checkpoint;
    std::string images;
    std::string out;
    bool no_postprocess = false;
    PostprocessConfig post;
    int threads = 0;
};

int cmd_predict(const PredictArgs& args) {
    Model model = load_checkpoint(args.checkpoint);
    model.set_mode(nn::BnMode::kInference);
    const int size = model.config().input_size;

    const auto files = list_images(args.images);
    if (files.empty()) throw ArgumentError("no images found in " + args.images);

    fs::create_directories(fs::path(args.out) / "raw");
    fs::create_directories(fs::path(args.out) / "masks");
    fs::create_directories(fs::path(args.out) / "overlays");

    for (const auto& file : files) {
        ImageRGB image = decode_image(file);
        if (image.width != size || image.height != size) {
            image = pad_to_square(image, size, nullptr);
        }
        const Tensor prob = model.forward(normalize(image));

        GrayImage raw(size, size);
        for (std::size_t i = 0; i < raw.pixels.size(); ++i) {
            raw.pixels[i] = quantize_probability(prob.data[i]);
        }
        const std::string stem = file.stem().string();
        encode_gray(raw, fs::path(args.out) / "raw" / (stem + ".png"));

        const BinaryMask mask = args.no_postprocess
                                    ? threshold_probability_map(prob, args.post.threshold)
                                    : postprocess(prob, args.post);
        encode_gray(gray_from_mask(mask), fs::path(args.out) / "masks" / (stem + ".png"));
        encode_image(overlay_boundary(image, mask),
                     fs::path(args.out) / "overlays" / (stem + ".png"));
    }
    std::cout << "predicted " << files.size() << " images into " << args.out << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ postprocess

struct PostprocessArgs {
    std::string in;
    std::string out;
    PostprocessConfig post;
};

int cmd_postprocess(const PostprocessArgs& args) {
    std::vector<fs::path> files;
    if (fs::is_directory(args.in)) {
        files = list_images(args.in);
    } else if (fs::exists(args.in)) {
        files = {args.in};
    } else {
        throw ArgumentError("no such file or directory: " + args.in);
    }
    if (files.empty()) throw ArgumentError("no mask images found in " + args.in);

    fs::create_directories(args.out);
    for (const auto& file : files) {
        const GrayImage gray = decode_gray(file);
        BinaryMask mask = threshold_mask(gray, args.post.threshold);
        mask = fill_holes(mask, args.post);
        mask = remove_small_regions(mask, args.post);
        encode_gray(gray_from_mask(mask), fs::path(args.out) / file.filename());
    }
    std::cout << "post-processed " << files.size() << " masks into " << args.out << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
    std::string pred;
    std::string gt;
    std::string out;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const auto pred_files = list_images(args.pred);
    if (pred_files.empty()) throw ArgumentError("no prediction masks in " + args.pred);

    std::vector<std::string> missing;
    std::vector<EvalPair> pairs;
    for (const auto& file : pred_files) {
        const fs::path gt_path = fs::path(args.gt) / file.filename();
        if (!fs::exists(gt_path)) {
            missing.push_back(file.filename().string());
            continue;
        }
        pairs.push_back({file.stem().string(), threshold_mask(decode_gray(file)),
                         threshold_mask(decode_gray(gt_path))});
    }
    if (!missing.empty()) {
        std::ostringstream os;
        os << "missing ground truth for:";
        for (const auto& name : missing) os << " " << name;
        throw ArgumentError(os.str());
    }

    const EvalReport report = evaluate_dataset(std::move(pairs));
    std::cout << report_table(report);
    if (!args.out.empty()) {
        fs::create_directories(args.out);
        write_text(fs::path(args.out) / "report.csv", report_csv(report));
        write_text(fs::path(args.out) / "report.txt", report_table(report));
    }
    return kExitOk;
}

void add_postprocess_options(CLI::App* sub, PostprocessConfig& post) {
    sub->add_option("--threshold", post.threshold, "binarization threshold (pixel > threshold)")
        ->check(CLI::Range(0, 255))
        ->capture_default_str();
    sub->add_option("--connectivity", post.connectivity, "foreground connectivity (4 or 8)")
        ->check(CLI::IsMember({4, 8}))
        ->capture_default_str();
    sub->add_option("--hole-fraction", post.hole_fraction,
                    "fill holes smaller than this fraction of the foreground")
        ->capture_default_str();
    sub->add_option("--noise-fraction", post.noise_fraction,
                    "remove regions smaller than this fraction of the foreground")
        ->capture_default_str();
    sub->add_option("--min-absolute", post.min_absolute, "absolute floor for region removal")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wseg: wound image segmentation pipeline"};
    app.require_subcommand(1);
    auto* config_opt = app.set_config("--config", "", "key=value configuration file");
    config_opt->envname("WSEG_CONFIG");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--n", synth_args.n, "sample count")->capture_default_str();
    synth->add_option("--seed", synth_args.spec.seed, "generator seed")->capture_default_str();
    synth->add_option("--size", synth_args.spec.image_size, "image size")->capture_default_str();
    synth->add_option("--min-blobs", synth_args.spec.min_blobs)->capture_default_str();
    synth->add_option("--max-blobs", synth_args.spec.max_blobs)->capture_default_str();
    synth->add_option("--noise", synth_args.spec.noise_amplitude)->capture_default_str();
    synth->add_option("--hole-prob", synth_args.spec.hole_probability)->capture_default_str();
    synth->add_option("--speck-prob", synth_args.spec.speck_probability)->capture_default_str();

    PrepareArgs prepare_args;
    auto* prepare = app.add_subcommand("prepare", "crop/pad raw images into a dataset");
    prepare->add_option("--images", prepare_args.images, "raw image directory")->required();
    prepare->add_option("--bboxes", prepare_args.bboxes,
                        "bbox csv (filename,x_min,y_min,x_max,y_max)");
    prepare->add_option("--masks", prepare_args.masks, "mask directory (optional)");
    prepare->add_flag("--derive-bboxes", prepare_args.derive_bboxes,
                      "derive bounding boxes from the annotation masks instead of a csv");
    prepare->add_option("--out", prepare_args.out, "output dataset directory")->required();
    prepare->add_option("--size", prepare_args.size, "target patch size")->capture_default_str();
    prepare->add_option("--margin", prepare_args.margin, "crop margin in pixels")
        ->capture_default_str();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a segmentation model");
    train->add_option("--data", train_args.data, "dataset directory with manifest.csv");
    train->add_option("--out", train_args.out, "output directory for checkpoint and log");
    train->add_option("--alpha", train_args.config.width_multiplier, "width multiplier")
        ->capture_default_str();
    train->add_option("--input-size", train_args.config.input_size, "network input size")
        ->capture_default_str();
    train->add_option("--expansion", train_args.config.expansion_ratio, "bottleneck expansion")
        ->capture_default_str();
    train->add_option("--dropout", train_args.config.dropout_rate, "dropout rate")
        ->capture_default_str();
    train->add_option("--batch", train_args.options.batch_size, "minibatch size")
        ->capture_default_str();
    train->add_option("--lr", train_args.options.learning_rate, "adam learning rate")
        ->capture_default_str();
    train->add_option("--max-epochs", train_args.options.max_epochs, "epoch limit")
        ->capture_default_str();
    train->add_option("--patience", train_args.options.patience, "early-stopping patience")
        ->capture_default_str();
    train->add_option("--seed", train_args.options.seed, "training seed")->capture_default_str();
    train->add_option("--threads", train_args.threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    train->add_flag("--no-augment", [&](std::int64_t) { train_args.options.augment_enabled = false; },
                    "disable data augmentation");
    train->add_flag("--describe", train_args.describe,
                    "print the model description (including the parameter count) and exit");

    PredictArgs predict_args;
    auto* predict = app.add_subcommand("predict", "run inference and post-processing");
    predict->add_option("--checkpoint", predict_args.checkpoint, "model checkpoint")->required();
    predict->add_option("--images", predict_args.images, "input image directory")->required();
    predict->add_option("--out", predict_args.out, "output directory")->required();
    predict->add_flag("--no-postprocess", predict_args.no_postprocess,
                      "write thresholded masks without the CCL stages");
    predict->add_option("--threads", predict_args.threads, "worker threads (0 = all cores)")
        ->capture_default_str();
    add_postprocess_options(predict, predict_args.post);

    PostprocessArgs post_args;
    auto* post = app.add_subcommand("postprocess", "clean up grayscale masks");
    post->add_option("--in", post_args.in, "mask file or directory")->required();
    post->add_option("--out", post_args.out, "output directory")->required();
    add_postprocess_options(post, post_args.post);

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "compare predictions against ground truth");
    evaluate->add_option("--pred", eval_args.pred, "prediction mask directory")->required();
    evaluate->add_option("--gt", eval_args.gt, "ground truth mask directory")->required();
    evaluate->add_option("--out", eval_args.out, "directory for report.csv / report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_args);
        if (prepare->parsed()) return cmd_prepare(prepare_args);
        if (train->parsed()) {
            set_num_threads(train_args.threads > 0
                                ? train_args.threads
                                : static_cast<int>(std::thread::hardware_concurrency()));
            return cmd_train(train_args);
        }
        if (predict->parsed()) {
            set_num_threads(predict_args.threads > 0
                                ? predict_args.threads
                                : static_cast<int>(std::thread::hardware_concurrency()));
            return cmd_predict(predict_args);
        }
        if (post->parsed()) return cmd_postprocess(post_args);
        if (evaluate->parsed()) return cmd_evaluate(eval_args);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
