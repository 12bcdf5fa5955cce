#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hestar {

// CSV writer with atomic replace (write temp, then rename).
class CsvWriter {
  public:
    explicit CsvWriter(std::string path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<double>& values);
    void raw_row(const std::string& line);
    void close();  // commits the file; also called by the destructor

  private:
    std::string path_;
    std::string tmp_path_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_file_atomic(const std::string& path, const std::string& contents);
void write_file_atomic(const std::string& path, const std::vector<unsigned char>& bytes);
std::vector<unsigned char> read_file_bytes(const std::string& path);

}  // namespace hestar
