#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wseg/image.hpp"

namespace wseg {

// Comma split without quoting; the manifest and bbox formats never quote.
std::vector<std::string> split_csv_line(const std::string& line);

struct ManifestRow {
    std::string image;
    std::string mask;
    std::string split;
};

// Reads manifest.csv rows; the header must contain image, mask and split
// columns (extra columns are ignored).
std::vector<ManifestRow> read_manifest(const std::filesystem::path& csv_path);

struct DataPair {
    std::string id;
    ImageRGB image;
    BinaryMask mask;
};

struct Dataset {
    std::vector<DataPair> train;
    std::vector<DataPair> val;
};

// Loads every manifest pair into memory. Masks are thresholded at >127.
Dataset load_dataset(const std::filesystem::path& dataset_dir);

}  // namespace wseg
