#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "taiji/agent.hpp"
#include "taiji/mcp.hpp"
#include "taiji/planner.hpp"
#include "taiji/refresher.hpp"
#include "taiji/routing.hpp"
#include "taiji/servers.hpp"
#include "taiji/transport.hpp"

namespace taiji {

// One federated server as the host sees it.
struct ServerSpec {
    std::string id;
    std::string kind;       // relational | image | vector
    std::string transport = "inproc";  // inproc | pipe | http
    std::vector<std::string> command;  // pipe: argv to spawn
    std::string url;                   // http: base url
    ServerOptions options;

    // in-process construction inputs
    std::string lake_dir;      // relational
    std::string labels_path;   // image: LabelOracle fixture
    std::string fields_path;   // image: extraction fixture (optional)
    double noise_epsilon = 0.0;
    uint64_t noise_seed = 0;
};

struct PlannerConfig {
    bool sampling = false;
    int sample_k = 32;
    std::string profiles_path;  // warm-start JSONL (optional)
    CostModelOptions cost;
};

struct EngineConfig {
    std::vector<DatasetRef> datasets;
    std::vector<ServerSpec> servers;
    PlannerConfig planner;
    LoopConfig loop;
    std::string query_log_path = "taiji_query_log.jsonl";
    int page_size = 256;
    int parallelism = 4;
    int call_timeout_ms = 30'000;

    static EngineConfig from_json(const nlohmann::json& j);
    static EngineConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
};

struct Catalog {
    struct ServerInfo {
        std::string id;
        std::string kind;
        std::string transport;
        std::vector<ToolDescriptor> tools;
    };

    std::vector<DatasetRef> datasets;
    std::vector<ServerInfo> servers;
    RoutingTable routing;

    Modality dataset_modality(const std::string& id) const;
    CatalogSummary summary() const;
};

struct NodeTrace {
    std::string node_id;
    std::string server_id;
    int64_t start_us = 0;  // relative to engine start, steady clock
    int64_t end_us = 0;
    size_t input_rows = 0;
    size_t output_rows = 0;
    nlohmann::json loop_trace;  // present when the server ran the loop

    nlohmann::json to_json() const;
};

struct ExecutionTrace {
    std::vector<NodeTrace> nodes;  // completion order
    double translate_ms = 0.0;
    double plan_ms = 0.0;
    double execute_ms = 0.0;
    double total_ms = 0.0;
    std::string chosen_signature;
    size_t candidates_considered = 0;

    const NodeTrace* find_node(const std::string& node_id) const;
    nlohmann::json to_json() const;
};

// MCP host: owns the catalog and connections, translates and plans queries,
// dispatches plan nodes to servers (independent branches run concurrently),
// assembles results, and appends one query-log entry per execution.
class HostEngine {
public:
    explicit HostEngine(EngineConfig config);
    ~HostEngine();

    HostEngine(const HostEngine&) = delete;
    HostEngine& operator=(const HostEngine&) = delete;

    const Catalog& catalog() const { return catalog_; }
    const EngineConfig& config() const { return config_; }

    std::pair<ResultSet, ExecutionTrace> execute_expression(const std::string& expression);
    std::pair<ResultSet, ExecutionTrace> execute_nl(const std::string& nl_query,
                                                    AgentClient& agent);
    std::pair<ResultSet, ExecutionTrace> execute_plan(const QueryPlan& plan,
                                                      const std::string& nl_context = "");

    McpClient& client_for(const std::string& server_id);
    QueryLog& query_log() { return *query_log_; }
    CostModel& cost_model() { return *cost_model_; }

    // Reply policy for server-initiated host/clarify requests; default
    // answers "proceed".
    void set_clarifier(std::function<nlohmann::json(const nlohmann::json&)> clarifier);

private:
    struct ServerHandle {
        ServerSpec spec;
        std::unique_ptr<McpServer> inproc_server;
        std::shared_ptr<TableStore> tables;  // inproc relational
        ProcessChannel process;
        std::unique_ptr<McpClient> client;
        std::vector<ToolDescriptor> tools;
    };

    void connect_servers();
    void build_catalog();
    std::map<std::string, double> base_cardinalities(const QueryPlan& plan);
    void sample_missing_profiles(const QueryPlan& plan);
    ResultSet execute_node(const std::string& node_id, const Operator& op,
                           const std::string& server_id,
                           const std::vector<const ResultSet*>& inputs, NodeTrace& trace);

    EngineConfig config_;
    Catalog catalog_;
    std::map<std::string, ServerHandle> servers_;
    std::unique_ptr<CostModel> cost_model_;
    PlanCache plan_cache_;
    std::unique_ptr<QueryLog> query_log_;
    std::function<nlohmann::json(const nlohmann::json&)> clarifier_;
    Clock::time_point epoch_ = Clock::now();
    std::mutex execute_mutex_;  // serializes scheduler bookkeeping, not node work
};

// Assembles per-node results into the final set: the sink's output with plan
// provenance attached. All sink ancestors must be present.
ResultSet assemble(const std::map<std::string, ResultSet>& results, const QueryPlan& plan);

}  // namespace taiji
