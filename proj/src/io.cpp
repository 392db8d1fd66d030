#include "qhardi/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qhardi {

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

AcquisitionScheme read_scheme(const std::string& path) {
    std::ifstream in = open_in(path);
    AcquisitionScheme scheme;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first && line.find('=') != std::string::npos) {
            std::istringstream iss(line);
            std::string tok;
            while (iss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "n0") scheme.n0 = std::stoi(val);
                else if (key == "b") scheme.b_value = std::stod(val);
            }
            first = false;
            continue;
        }
        first = false;
        std::istringstream iss(line);
        double x, y, z;
        if (!(iss >> x >> y >> z)) {
            throw std::runtime_error("malformed scheme line in " + path + ": " + line);
        }
        scheme.directions.push_back(Direction::normalize({x, y, z}));
    }
    if (scheme.n() < 6) throw std::runtime_error("scheme has fewer than 6 directions: " + path);
    return scheme;
}

void write_scheme(const AcquisitionScheme& scheme, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "n0=" << scheme.n0 << " b=" << format_double(scheme.b_value) << "\n";
    char buf[96];
    for (const auto& d : scheme.directions) {
        std::snprintf(buf, sizeof buf, "%.10f %.10f %.10f\n", d.x(), d.y(), d.z());
        out << buf;
    }
}

void write_calibrations(const std::vector<NullCalibration>& cals, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "qhardi-thresholds v1\n";
    for (const auto& c : cals) {
        out << "calibration stat=" << stat_name(c.stat) << " spec_hash=" << std::hex
            << c.spec_hash << std::dec << " sigma=" << format_double(c.sigma)
            << " scheme_n=" << c.scheme_n << " reps=" << c.reps << " seed=" << c.seed
            << " mean=" << format_double(c.mean) << " sd=" << format_double(c.sd) << "\n";
        for (const auto& [level, q] : c.quantiles) {
            out << "q " << format_double(level) << " " << format_double(q) << "\n";
        }
        out << "end\n";
    }
}

std::vector<NullCalibration> read_calibrations(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("qhardi-thresholds", 0) != 0) {
        throw std::runtime_error("not a qhardi threshold table: " + path);
    }
    std::vector<NullCalibration> cals;
    NullCalibration cur;
    bool open = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream iss(line);
        std::string tok;
        iss >> tok;
        if (tok == "calibration") {
            cur = NullCalibration{};
            open = true;
            std::string kv;
            while (iss >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = kv.substr(0, eq);
                const std::string val = kv.substr(eq + 1);
                if (key == "stat") cur.stat = stat_from_name(val);
                else if (key == "spec_hash") cur.spec_hash = std::stoull(val, nullptr, 16);
                else if (key == "sigma") cur.sigma = std::stod(val);
                else if (key == "scheme_n") cur.scheme_n = std::stoi(val);
                else if (key == "reps") cur.reps = std::stoi(val);
                else if (key == "seed") cur.seed = std::stoull(val);
                else if (key == "mean") cur.mean = std::stod(val);
                else if (key == "sd") cur.sd = std::stod(val);
            }
        } else if (tok == "q" && open) {
            double level, q;
            iss >> level >> q;
            cur.quantiles[level] = q;
        } else if (tok == "end" && open) {
            cals.push_back(cur);
            open = false;
        }
    }
    return cals;
}

std::optional<NullCalibration> find_calibration(const std::vector<NullCalibration>& cals,
                                                StatTag stat, double sigma, int scheme_n) {
    for (const auto& c : cals) {
        if (c.stat == stat && c.scheme_n == scheme_n && std::abs(c.sigma - sigma) < 1e-12) {
            return c;
        }
    }
    return std::nullopt;
}

HardiSample VolumeDataset::sample_at(size_t voxel) const {
    const size_t stride = values_per_voxel();
    const size_t base = voxel * stride;
    if (base + stride > data.size()) throw std::out_of_range("voxel index past volume end");
    HardiSample s;
    s.scheme = scheme;
    const size_t n = scheme.directions.size();
    s.raw_values.assign(data.begin() + base, data.begin() + base + n);
    s.b0_values.assign(data.begin() + base + n, data.begin() + base + stride);
    s.noise_sigma = -1.0; // unknown for ingested data
    return s;
}

VolumeDataset read_volume(const std::string& header_path) {
    std::ifstream in = open_in(header_path);
    const auto dir = std::filesystem::path(header_path).parent_path();
    std::string line;
    if (!std::getline(in, line) || line.rfind("qhardi-volume", 0) != 0) {
        throw std::runtime_error("not a qhardi volume header: " + header_path);
    }
    VolumeDataset ds;
    std::string scheme_path, data_path, mask_path;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "dims") {
            std::istringstream iss(val);
            if (!(iss >> ds.nx >> ds.ny >> ds.nz)) {
                throw std::runtime_error("malformed dims in " + header_path);
            }
        } else if (key == "scheme") scheme_path = (dir / val).string();
        else if (key == "data") data_path = (dir / val).string();
        else if (key == "mask") mask_path = (dir / val).string();
    }
    if (ds.nx <= 0 || ds.ny <= 0 || ds.nz <= 0) {
        throw std::runtime_error("volume header missing dims: " + header_path);
    }
    if (scheme_path.empty() || data_path.empty()) {
        throw std::runtime_error("volume header missing scheme/data paths: " + header_path);
    }
    ds.scheme = read_scheme(scheme_path);

    std::ifstream raw(data_path, std::ios::binary);
    if (!raw) throw std::runtime_error("cannot open volume data: " + data_path);
    raw.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(raw.tellg());
    raw.seekg(0);
    const size_t expect = ds.voxel_count() * ds.values_per_voxel() * sizeof(float);
    if (bytes != expect) {
        throw std::runtime_error("volume data size mismatch for " + data_path + ": have " +
                                 std::to_string(bytes) + " bytes, expected " +
                                 std::to_string(expect));
    }
    ds.data.resize(bytes / sizeof(float));
    raw.read(reinterpret_cast<char*>(ds.data.data()), static_cast<std::streamsize>(bytes));

    if (!mask_path.empty()) {
        std::ifstream m(mask_path, std::ios::binary);
        if (!m) throw std::runtime_error("cannot open mask: " + mask_path);
        m.seekg(0, std::ios::end);
        const auto msize = static_cast<size_t>(m.tellg());
        m.seekg(0);
        if (msize != ds.voxel_count()) {
            throw std::runtime_error("mask size mismatch for " + mask_path);
        }
        ds.mask.resize(msize);
        m.read(reinterpret_cast<char*>(ds.mask.data()), static_cast<std::streamsize>(msize));
    }
    return ds;
}

void write_volume(const VolumeDataset& ds, const std::string& header_path,
                  const std::string& scheme_path, const std::string& data_path,
                  const std::string& mask_path) {
    write_scheme(ds.scheme, scheme_path);
    {
        std::ofstream raw(data_path, std::ios::binary);
        if (!raw) throw std::runtime_error("cannot write volume data: " + data_path);
        raw.write(reinterpret_cast<const char*>(ds.data.data()),
                  static_cast<std::streamsize>(ds.data.size() * sizeof(float)));
    }
    if (!mask_path.empty() && !ds.mask.empty()) {
        std::ofstream m(mask_path, std::ios::binary);
        if (!m) throw std::runtime_error("cannot write mask: " + mask_path);
        m.write(reinterpret_cast<const char*>(ds.mask.data()),
                static_cast<std::streamsize>(ds.mask.size()));
    }
    std::ofstream out = open_out(header_path);
    const auto rel = [&](const std::string& p) {
        return std::filesystem::path(p).filename().string();
    };
    out << "qhardi-volume v1\n";
    out << "dims=" << ds.nx << " " << ds.ny << " " << ds.nz << "\n";
    out << "scheme=" << rel(scheme_path) << "\n";
    out << "data=" << rel(data_path) << "\n";
    if (!mask_path.empty() && !ds.mask.empty()) out << "mask=" << rel(mask_path) << "\n";
}

} // namespace qhardi
