#include "hestar/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "hestar/ensemble.hpp"

namespace hestar {

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

CsvWriter::CsvWriter(std::string path, const std::vector<std::string>& header)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp") {
    out_.open(tmp_path_, std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot open for writing: " + tmp_path_);
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
    }
}

void CsvWriter::row(const std::vector<double>& values) {
    std::ostringstream line;
    line.precision(17);
    for (std::size_t i = 0; i < values.size(); ++i) line << (i ? "," : "") << values[i];
    out_ << line.str() << '\n';
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << '\n'; }

void CsvWriter::close() {
    if (committed_) return;
    out_.flush();
    out_.close();
    if (std::rename(tmp_path_.c_str(), path_.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp_path_ + " -> " + path_);
    committed_ = true;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(contents.data(), std::streamsize(contents.size()));
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " -> " + path);
}

void write_file_atomic(const std::string& path, const std::vector<unsigned char>& bytes) {
    write_file_atomic(path,
                      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void Ensemble::write_csv(const std::string& path) const {
    CsvWriter csv(path, {"x", "y", "z", "vx", "vy", "vz"});
    for (std::size_t i = 0; i < size(); ++i) {
        const Vec3& p = positions[i];
        const Vec3& v = velocities[i];
        csv.row({p[0], p[1], p[2], v[0], v[1], v[2]});
    }
    csv.close();
}

}  // namespace hestar
