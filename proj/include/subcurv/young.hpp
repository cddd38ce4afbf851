#pragma once
// Young diagrams of geodesics: column heights d_1 >= d_2 >= ... >= d_s,
// row lengths (the conjugate partition), and the reduced diagram obtained by
// collapsing rows of equal length.

#include <numeric>
#include <string>
#include <vector>

#include "subcurv/error.hpp"

namespace subcurv {

struct ReducedDiagram {
    std::vector<int> lengths;         // distinct row lengths n_1 > n_2 > ... > n_D1
    std::vector<int> multiplicities;  // r_a = number of rows of length n_a

    int rows() const { return static_cast<int>(lengths.size()); }
};

class YoungDiagram {
public:
    YoungDiagram() = default;

    // Column heights, weakly decreasing and positive.
    explicit YoungDiagram(std::vector<int> cols) : cols_(std::move(cols)) {
        for (size_t i = 0; i < cols_.size(); ++i) {
            if (cols_[i] <= 0)
                throw Error(ErrorKind::Invalid, "diagram columns must be positive");
            if (i > 0 && cols_[i] > cols_[i - 1])
                throw Error(ErrorKind::Invalid, "diagram columns must be weakly decreasing");
        }
    }

    const std::vector<int>& columns() const { return cols_; }
    int num_columns() const { return static_cast<int>(cols_.size()); }
    int num_rows() const { return cols_.empty() ? 0 : cols_[0]; }
    int num_boxes() const { return std::accumulate(cols_.begin(), cols_.end(), 0); }

    // Row lengths n_a = #{ j : d_j >= a }, a = 1..d_1 (weakly decreasing).
    std::vector<int> row_lengths() const {
        std::vector<int> rows(num_rows(), 0);
        for (int h : cols_)
            for (int a = 0; a < h; ++a) ++rows[a];
        return rows;
    }

    ReducedDiagram reduced() const {
        ReducedDiagram rd;
        for (int len : row_lengths()) {
            if (!rd.lengths.empty() && rd.lengths.back() == len) {
                ++rd.multiplicities.back();
            } else {
                rd.lengths.push_back(len);
                rd.multiplicities.push_back(1);
            }
        }
        return rd;
    }

    // Block map: full row index a (1-based) -> reduced row index (1-based).
    // The column index b is unchanged by the reduction.
    int reduced_row_of(int a) const {
        auto rows = row_lengths();
        if (a < 1 || a > static_cast<int>(rows.size()))
            throw Error(ErrorKind::Invalid, "row index out of range");
        ReducedDiagram rd = reduced();
        int cum = 0;
        for (int i = 0; i < rd.rows(); ++i) {
            cum += rd.multiplicities[i];
            if (a <= cum) return i + 1;
        }
        return rd.rows();
    }

    bool operator==(const YoungDiagram& o) const { return cols_ == o.cols_; }
    bool operator!=(const YoungDiagram& o) const { return !(*this == o); }

    // Lexicographic order on column vectors; used for the maximal-diagram set.
    bool operator<(const YoungDiagram& o) const { return cols_ < o.cols_; }

    std::string to_string() const {
        std::string s = "Y(";
        for (size_t i = 0; i < cols_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(cols_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> cols_;
};

}  // namespace subcurv
