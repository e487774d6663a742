#ifndef PHSMM_DATASET_HPP
#define PHSMM_DATASET_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "phsmm/emission.hpp"

namespace phsmm {

// Observation sequence with explicitly marked missing entries.
struct Dataset {
    std::vector<std::string> channel_names;
    std::vector<ObservationRecord> records;

    std::size_t length() const { return records.size(); }
    std::size_t n_channels() const { return channel_names.size(); }

    void validate() const {
        if (records.empty()) throw std::invalid_argument("Dataset: needs at least one record");
        for (const auto& rec : records)
            if (rec.size() != channel_names.size())
                throw std::invalid_argument("Dataset: record width does not match schema");
    }
};

}  // namespace phsmm

#endif
