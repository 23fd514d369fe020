#include <algorithm>
#include <fstream>

#include "wseg/dataset.hpp"
#include "wseg/imaging.hpp"

namespace wseg {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw IoError("cannot open manifest " + csv_path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("manifest is empty: " + csv_path.string());

    const auto header = split_csv_line(line);
    int img_col = -1, mask_col = -1, split_col = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "image") img_col = static_cast<int>(i);
        if (header[i] == "mask") mask_col = static_cast<int>(i);
        if (header[i] == "split") split_col = static_cast<int>(i);
    }
    if (img_col < 0 || mask_col < 0 || split_col < 0) {
        throw FormatError("manifest header must contain image, mask and split columns");
    }

    std::vector<ManifestRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::size_t need =
            static_cast<std::size_t>(std::max({img_col, mask_col, split_col})) + 1;
        if (fields.size() < need) {
            throw FormatError("manifest row " + std::to_string(line_no) + " is malformed");
        }
        rows.push_back({fields[static_cast<std::size_t>(img_col)],
                        fields[static_cast<std::size_t>(mask_col)],
                        fields[static_cast<std::size_t>(split_col)]});
    }
    return rows;
}

Dataset load_dataset(const std::filesystem::path& dataset_dir) {
    const auto rows = read_manifest(dataset_dir / "manifest.csv");
    Dataset ds;
    for (const auto& row : rows) {
        DataPair pair;
        pair.id = std::filesystem::path(row.image).stem().string();
        pair.image = decode_image(dataset_dir / row.image);
        if (row.mask.empty()) {
            throw FormatError("manifest row for " + row.image + " has no mask");
        }
        pair.mask = threshold_mask(decode_gray(dataset_dir / row.mask));
        if (pair.mask.width != pair.image.width || pair.mask.height != pair.image.height) {
            throw FormatError("mask dims differ from image dims for " + row.image);
        }
        if (row.split == "train") {
            ds.train.push_back(std::move(pair));
        } else if (row.split == "val") {
            ds.val.push_back(std::move(pair));
        } else {
            throw FormatError("unknown split '" + row.split + "' for " + row.image);
        }
    }
    return ds;
}

}  // namespace wseg
