#ifndef ASRRL_HARNESS_CSV_HPP_
#define ASRRL_HARNESS_CSV_HPP_

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace asrrl::harness {

// RFC 4180: fields containing a comma, quote, CR or LF are quoted and inner
// quotes doubled; records end with CRLF.
std::string csv_escape(std::string_view field);
std::string csv_record(const std::vector<std::string>& fields);

// Parses a whole document; accepts CRLF or LF record ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

// Append-only writer shared by concurrent producers; each row is written
// and flushed under one lock.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header);

  const std::vector<std::string>& header() const { return header_; }
  void write(const std::vector<std::string>& fields);
  std::size_t rows() const;

 private:
  std::vector<std::string> header_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::size_t rows_ = 0;
};

}  // namespace asrrl::harness

#endif  // ASRRL_HARNESS_CSV_HPP_
