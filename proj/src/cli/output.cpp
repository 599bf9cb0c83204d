#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <system_error>

#include <unistd.h>

#include "coordlqr/coordcli.hpp"

namespace coordlqr::cli {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i > 0) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != columns_) {
        throw Error(ErrorCode::InternalInconsistency, "CSV row does not match the header");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) text_ += ',';
        text_ += format_double(values[i]);
    }
    text_ += '\n';
}

void write_atomic(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw ConfigError(ErrorCode::InvalidArgument, "cannot open output file '" + path + "'");
        }
        out << contents;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw ConfigError(ErrorCode::InvalidArgument, "failed writing output file '" + path + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw ConfigError(ErrorCode::InvalidArgument, "cannot move output into place at '" + path + "'");
    }
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
        return 2;
    }
    switch (e.code()) {
        case ErrorCode::NoStabilizingSolution:
        case ErrorCode::InternalInconsistency:
        case ErrorCode::UnstableClosedLoop:
            return 3;
        default:
            return 2;
    }
}

std::string error_line(std::string_view code, std::string_view message, int exit_code) {
    const json line = {{"error", std::string(code)}, {"message", std::string(message)}, {"exit_code", exit_code}};
    return line.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace coordlqr::cli
