#include "bregmix/output.hpp"

#include <charconv>
#include <fstream>

#include "bregmix/error.hpp"

namespace bregmix {

namespace {

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
        : name_(path.filename().string()), out_(path, std::ios::binary), columns_(header.size())
    {
        if (!out_) {
            throw Error("cannot open " + path.string() + " for writing");
        }
        for (std::size_t i = 0; i < header.size(); ++i) {
            out_ << (i ? "," : "") << header[i];
        }
        out_ << '\n';
    }

    CsvWriter& begin_row(std::size_t t)
    {
        out_ << t;
        return *this;
    }
    CsvWriter& operator<<(double value)
    {
        out_ << ',' << format_double(value);
        return *this;
    }
    CsvWriter& operator<<(std::size_t value)
    {
        out_ << ',' << value;
        return *this;
    }
    void end_row()
    {
        out_ << '\n';
        ++rows_;
    }

    WrittenFile finish()
    {
        out_.close();
        if (!out_) {
            throw Error("failed writing " + name_);
        }
        return {name_, rows_, columns_};
    }

private:
    std::string name_;
    std::ofstream out_;
    std::size_t columns_;
    std::size_t rows_ = 0;
};

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count)
{
    std::vector<std::string> names;
    for (Eigen::Index i = 1; i <= count; ++i) {
        names.push_back(prefix + std::to_string(i));
    }
    return names;
}

void append(std::vector<std::string>& to, const std::vector<std::string>& from)
{
    to.insert(to.end(), from.begin(), from.end());
}

}  // namespace

std::string format_double(double value)
{
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value, std::chars_format::general, 17);
    return std::string(buffer, result.ptr);
}

std::vector<WrittenFile> write_curves(const CurveSet& curves, const std::filesystem::path& directory)
{
    std::filesystem::create_directories(directory);
    const std::size_t rows = curves.rows();
    const Eigen::Index m = curves.mse_constituent.cols();
    const Eigen::Index k = curves.weights_mean.cols();
    const Eigen::Index entries = curves.weights_moment.cols();
    std::vector<WrittenFile> files;

    {
        std::vector<std::string> header{"t", "mse_mixture"};
        append(header, numbered("mse_c", m));
        if (curves.has_theory) {
            header.push_back("mse_theory");
        }
        CsvWriter csv(directory / "mse.csv", header);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            csv.begin_row(curves.t[r]) << curves.mse_mixture[r];
            for (Eigen::Index c = 0; c < m; ++c) {
                csv << curves.mse_constituent(row, c);
            }
            if (curves.has_theory) {
                csv << curves.mse_theory[r];
            }
            csv.end_row();
        }
        files.push_back(csv.finish());
    }

    {
        std::vector<std::string> header{"t"};
        append(header, numbered("qa_", k));
        if (curves.has_theory) {
            append(header, numbered("theory_qa_", k));
        }
        CsvWriter csv(directory / "weights_mean.csv", header);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            csv.begin_row(curves.t[r]);
            for (Eigen::Index c = 0; c < k; ++c) {
                csv << curves.weights_mean(row, c);
            }
            if (curves.has_theory) {
                for (Eigen::Index c = 0; c < k; ++c) {
                    csv << curves.theory_mean(row, c);
                }
            }
            csv.end_row();
        }
        files.push_back(csv.finish());
    }

    {
        std::vector<std::string> header{"t"};
        append(header, numbered("w_", m));
        CsvWriter csv(directory / "weights_effective.csv", header);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            csv.begin_row(curves.t[r]);
            for (Eigen::Index c = 0; c < m; ++c) {
                csv << curves.weights_effective(row, c);
            }
            csv.end_row();
        }
        files.push_back(csv.finish());
    }

    {
        std::vector<std::string> header{"t"};
        for (const auto& [i, j] : curves.moment_entries) {
            header.push_back("Q_" + std::to_string(i) + "_" + std::to_string(j));
        }
        if (curves.has_theory) {
            for (const auto& [i, j] : curves.moment_entries) {
                header.push_back("theory_Q_" + std::to_string(i) + "_" + std::to_string(j));
            }
        }
        CsvWriter csv(directory / "weights_moment.csv", header);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = static_cast<Eigen::Index>(r);
            csv.begin_row(curves.t[r]);
            for (Eigen::Index c = 0; c < entries; ++c) {
                csv << curves.weights_moment(row, c);
            }
            if (curves.has_theory) {
                for (Eigen::Index c = 0; c < entries; ++c) {
                    csv << curves.theory_moment(row, c);
                }
            }
            csv.end_row();
        }
        files.push_back(csv.finish());
    }

    {
        std::vector<std::string> header{"t", "linearization_diff", "quotient_diff", "saturation_count"};
        if (curves.has_theory) {
            header.push_back("convergence_radius");
        }
        CsvWriter csv(directory / "diagnostics.csv", header);
        for (std::size_t r = 0; r < rows; ++r) {
            csv.begin_row(curves.t[r]) << curves.linearization_diff[r] << curves.quotient_diff[r]
                                       << curves.saturation_count[r];
            if (curves.has_theory) {
                csv << curves.convergence_radius[r];
            }
            csv.end_row();
        }
        files.push_back(csv.finish());
    }

    return files;
}

nlohmann::json manifest_to_json(const Manifest& manifest)
{
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : manifest.files) {
        files.push_back({{"name", f.name}, {"rows", f.rows}, {"columns", f.columns}});
    }
    return {
        {"version", manifest.version},
        {"seed", manifest.seed},
        {"wall_clock_seconds", manifest.wall_clock_seconds},
        {"runs_used", manifest.runs_used},
        {"diverged_runs", manifest.diverged_runs},
        {"config", manifest.config},
        {"files", files},
    };
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& directory)
{
    std::filesystem::create_directories(directory);
    std::ofstream out(directory / "manifest.json", std::ios::binary);
    out << manifest_to_json(manifest).dump(2) << '\n';
    if (!out) {
        throw Error("failed writing manifest.json");
    }
}

}  // namespace bregmix
