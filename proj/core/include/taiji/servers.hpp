#pragma once

#include <memory>
#include <shared_mutex>

#include "taiji/embedder.hpp"
#include "taiji/mcp.hpp"
#include "taiji/refresher.hpp"
#include "taiji/result_set.hpp"
#include "taiji/table.hpp"
#include "taiji/vector_index.hpp"
#include "taiji/vision.hpp"

namespace taiji {

struct ServerOptions {
    int page_size = 256;           // tuples per result/input frame
    int64_t injected_latency_us = 0;  // simulated provider cost (per item on
                                      // the image server, per call elsewhere)
    bool persist_tables = false;   // write CSV back after mutations
};

// Paged ResultSet exchange between host and servers. Large inputs stream in
// via open/push, large outputs stream out via emit/read_page.
class FrameStore {
public:
    explicit FrameStore(int page_size);

    std::string open(std::vector<std::string> columns);
    void push(const std::string& handle, const nlohmann::json& rows);
    ResultSet take(const std::string& handle);  // consumes the stream

    // Inline result when it fits in one page, otherwise first page + handle.
    nlohmann::json emit(ResultSet rs, nlohmann::json extra = nlohmann::json::object());
    nlohmann::json read_page(const std::string& handle, size_t page);
    void free(const std::string& handle);

    int page_size() const { return page_size_; }
    size_t live_handles() const;

private:
    int page_size_;
    mutable std::mutex mutex_;
    std::map<std::string, ResultSet> incoming_;
    std::map<std::string, ResultSet> outgoing_;
    int64_t next_ = 1;
};

// Adds the frames/* tool family to a server.
void add_frame_tools(McpServer& server, const std::shared_ptr<FrameStore>& frames);

// Host-side helpers for the paged exchange.
ResultSet fetch_result_set(McpClient& client, const nlohmann::json& response);
// Ships a result set to the server's frame store; returns the handle.
std::string ship_result_set(McpClient& client, const ResultSet& rs, int page_size);

// Named dataset -> vector index registry with snapshot semantics: searches
// run against immutable snapshots, upserts swap in a new one.
class VectorIndexRegistry {
public:
    void put(const std::string& dataset, FilteredVectorIndex index, Modality modality);
    std::shared_ptr<const FilteredVectorIndex> get(const std::string& dataset) const;
    Modality modality_of(const std::string& dataset) const;
    bool has(const std::string& dataset) const;
    std::vector<std::string> datasets() const;

    // Clone-add-swap; creates the dataset on first call (dimension from the
    // first record).
    void upsert(const std::string& dataset, const std::vector<VectorRecord>& records,
                Modality modality, const IndexParams& params);
    void augment(const std::string& dataset, const AttrCondition& condition);

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::pair<std::shared_ptr<const FilteredVectorIndex>, Modality>> indexes_;
};

// Relational server: rel.execute over {Scan,Filter,Project,Limit,Join}
// fragments (frames:// scans resolve shipped intermediates), rel.sample,
// rel.stats, and mutation tools that notify lake://<table> subscribers.
std::unique_ptr<McpServer> make_relational_server(
    const std::string& id, std::shared_ptr<TableStore> tables,
    std::shared_ptr<ScorerRegistry> scorers = nullptr, ServerOptions options = {});

// Image-predicate server: image.match / image.extract behind pluggable
// providers.
std::unique_ptr<McpServer> make_image_server(
    const std::string& id, std::shared_ptr<VisionProvider> provider,
    std::shared_ptr<ExtractionProvider> extractor = nullptr, ServerOptions options = {});

// Vector server: vec.sem_match (optionally wrapped in the iterative
// refinement loop, with host/clarify callbacks), vec.score_items, and the
// exclusive vec.upsert write path.
std::unique_ptr<McpServer> make_vector_server(const std::string& id,
                                              std::shared_ptr<VectorIndexRegistry> registry,
                                              EmbedderOptions embedder = {},
                                              ServerOptions options = {});

}  // namespace taiji
