#pragma once

// On-disk formats: direction scheme files, versioned threshold tables,
// flat binary volumes with text sidecar headers, and RFC-4180 CSV output.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qhardi/phantom.hpp"
#include "qhardi/stats.hpp"

namespace qhardi {

// Scheme files: one unit direction per line, three numeric fields,
// optional leading header line "n0=<int> b=<float>".
AcquisitionScheme read_scheme(const std::string& path);
void write_scheme(const AcquisitionScheme& scheme, const std::string& path);

// Threshold tables, versioned plain text. One block per calibration with
// statistic tag, null spec hash, sigma, scheme size, replicates, seed,
// mean/sd and the quantile grid.
void write_calibrations(const std::vector<NullCalibration>& cals, const std::string& path);
std::vector<NullCalibration> read_calibrations(const std::string& path);

/// Pick the calibration matching (stat, sigma, scheme_n) from a table.
std::optional<NullCalibration> find_calibration(const std::vector<NullCalibration>& cals,
                                                StatTag stat, double sigma, int scheme_n);

// Volume container: flat little-endian float32 voxel data plus a text
// header. Per voxel the layout is the n directional magnitudes followed by
// the n0 b=0 magnitudes; voxels are x-fastest. The optional mask is a flat
// uint8 array of the spatial shape.
struct VolumeDataset {
    int nx = 0, ny = 0, nz = 0;
    AcquisitionScheme scheme;
    std::vector<float> data;        // nx*ny*nz*(n + n0)
    std::vector<std::uint8_t> mask; // empty = all voxels

    size_t voxel_count() const { return static_cast<size_t>(nx) * ny * nz; }
    size_t values_per_voxel() const {
        return scheme.directions.size() + static_cast<size_t>(scheme.n0);
    }
    bool masked_in(size_t voxel) const { return mask.empty() || mask[voxel] != 0; }
    HardiSample sample_at(size_t voxel) const;
};

VolumeDataset read_volume(const std::string& header_path);
void write_volume(const VolumeDataset& ds, const std::string& header_path,
                  const std::string& scheme_path, const std::string& data_path,
                  const std::string& mask_path = "");

// Minimal CSV writing with RFC-4180 quoting.
std::string csv_field(const std::string& value);
std::string format_double(double v);

} // namespace qhardi
