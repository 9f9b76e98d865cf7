#include "noiseproto/scores.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "noiseproto/error.hpp"

namespace noiseproto {

double RelevanceScores::mean_clean() const {
    if (clean_count == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < clean_count; ++i) acc += values[i];
    return acc / static_cast<double>(clean_count);
}

double RelevanceScores::mean_noisy() const {
    if (noisy_count() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = clean_count; i < values.size(); ++i) acc += values[i];
    return acc / static_cast<double>(noisy_count());
}

void RelevanceScores::validate() const {
    if (clean_count > values.size()) {
        throw config_error("relevance scores: clean count exceeds length");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > 0.0 && values[i] < 1.0)) {
            throw numeric_error("relevance scores: entry " + std::to_string(i) +
                                " outside (0, 1)");
        }
    }
}

void save_scores_csv(const std::string& path, const RelevanceScores& scores) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out << "index,is_clean,score\n";
    char num[64];
    for (std::size_t i = 0; i < scores.values.size(); ++i) {
        std::snprintf(num, sizeof num, "%.17g", scores.values[i]);
        out << i << ',' << (i < scores.clean_count ? 1 : 0) << ',' << num << '\n';
    }
    if (!out) throw io_error(path + ": write failed");
}

RelevanceScores load_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error(path + ": cannot open for reading");
    RelevanceScores scores;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) continue;  // header
        std::stringstream ss(line);
        std::string idx, clean, score;
        if (!std::getline(ss, idx, ',') || !std::getline(ss, clean, ',') ||
            !std::getline(ss, score, ',')) {
            throw io_error(path + ": line " + std::to_string(line_no) + ": malformed row");
        }
        try {
            if (std::stoi(clean) != 0) {
                if (scores.clean_count != scores.values.size()) {
                    throw io_error(path + ": line " + std::to_string(line_no) +
                                   ": clean rows must precede noisy rows");
                }
                scores.clean_count += 1;
            }
            scores.values.push_back(std::stod(score));
        } catch (const io_error&) {
            throw;
        } catch (const std::exception&) {
            throw io_error(path + ": line " + std::to_string(line_no) + ": malformed row");
        }
    }
    scores.validate();
    return scores;
}

}  // namespace noiseproto
