#include "taiji/servers.hpp"

#include <algorithm>
#include <thread>

#include "taiji/iterative.hpp"
#include "taiji/plan.hpp"
#include "taiji/rel_exec.hpp"

namespace taiji {

namespace {

constexpr const char* kFramesPrefix = "frames://";

void inject_latency(int64_t micros) {
    if (micros > 0) std::this_thread::sleep_for(std::chrono::microseconds(micros));
}

nlohmann::json rows_to_json(const std::vector<ResultTuple>& tuples, size_t from, size_t count) {
    nlohmann::json rows = nlohmann::json::array();
    for (size_t i = from; i < std::min(tuples.size(), from + count); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& [_, v] : tuples[i].cells) row.push_back(value_to_json(v));
        rows.push_back(std::move(row));
    }
    return rows;
}

void append_rows(ResultSet& rs, const nlohmann::json& rows) {
    for (const auto& row : rows) {
        if (row.size() != rs.columns.size()) throw Error("frame row arity mismatch");
        ResultTuple t;
        for (size_t i = 0; i < rs.columns.size(); ++i) {
            t.cells.emplace_back(rs.columns[i], value_from_json(row[i]));
        }
        rs.tuples.push_back(std::move(t));
    }
}

ItemRef item_ref_from_json(const nlohmann::json& j) {
    Value v = value_from_json(j);
    if (const auto* ref = std::get_if<ItemRef>(&v)) return *ref;
    throw Error("expected an item ref, got " + j.dump());
}

}  // namespace

FrameStore::FrameStore(int page_size) : page_size_(std::max(1, page_size)) {}

std::string FrameStore::open(std::vector<std::string> columns) {
    std::lock_guard lock(mutex_);
    std::string handle = "f" + std::to_string(next_++);
    ResultSet rs;
    rs.columns = std::move(columns);
    incoming_[handle] = std::move(rs);
    return handle;
}

void FrameStore::push(const std::string& handle, const nlohmann::json& rows) {
    std::lock_guard lock(mutex_);
    auto it = incoming_.find(handle);
    if (it == incoming_.end()) throw Error("unknown frame handle " + handle);
    append_rows(it->second, rows);
}

ResultSet FrameStore::take(const std::string& handle) {
    std::lock_guard lock(mutex_);
    auto it = incoming_.find(handle);
    if (it == incoming_.end()) throw Error("unknown frame handle " + handle);
    ResultSet rs = std::move(it->second);
    incoming_.erase(it);
    return rs;
}

nlohmann::json FrameStore::emit(ResultSet rs, nlohmann::json extra) {
    nlohmann::json out = std::move(extra);
    out["columns"] = rs.columns;
    out["cardinality"] = rs.tuples.size();
    size_t page_count =
        (rs.tuples.size() + static_cast<size_t>(page_size_) - 1) / static_cast<size_t>(page_size_);
    if (page_count <= 1) {
        out["rows"] = rows_to_json(rs.tuples, 0, rs.tuples.size());
        return out;
    }
    out["rows"] = rows_to_json(rs.tuples, 0, static_cast<size_t>(page_size_));
    out["pages"] = page_count;
    std::lock_guard lock(mutex_);
    std::string handle = "o" + std::to_string(next_++);
    out["handle"] = handle;
    outgoing_[handle] = std::move(rs);
    return out;
}

nlohmann::json FrameStore::read_page(const std::string& handle, size_t page) {
    std::lock_guard lock(mutex_);
    auto it = outgoing_.find(handle);
    if (it == outgoing_.end()) throw Error("unknown frame handle " + handle);
    return {{"rows", rows_to_json(it->second.tuples, page * static_cast<size_t>(page_size_),
                                  static_cast<size_t>(page_size_))}};
}

void FrameStore::free(const std::string& handle) {
    std::lock_guard lock(mutex_);
    outgoing_.erase(handle);
    incoming_.erase(handle);
}

size_t FrameStore::live_handles() const {
    std::lock_guard lock(mutex_);
    return incoming_.size() + outgoing_.size();
}

void add_frame_tools(McpServer& server, const std::shared_ptr<FrameStore>& frames) {
    server.add_tool("frames/open", {{"type", "object"}},
                    [frames](const nlohmann::json& args, RequestContext&) {
                        return nlohmann::json{
                            {"handle",
                             frames->open(args.at("columns").get<std::vector<std::string>>())}};
                    });
    server.add_tool("frames/push", {{"type", "object"}},
                    [frames](const nlohmann::json& args, RequestContext&) {
                        frames->push(args.at("handle").get<std::string>(), args.at("rows"));
                        return nlohmann::json{{"ok", true}};
                    });
    server.add_tool("frames/read", {{"type", "object"}},
                    [frames](const nlohmann::json& args, RequestContext&) {
                        return frames->read_page(args.at("handle").get<std::string>(),
                                                 args.at("page").get<size_t>());
                    });
    server.add_tool("frames/free", {{"type", "object"}},
                    [frames](const nlohmann::json& args, RequestContext&) {
                        frames->free(args.at("handle").get<std::string>());
                        return nlohmann::json{{"ok", true}};
                    });
}

ResultSet fetch_result_set(McpClient& client, const nlohmann::json& response) {
    ResultSet rs;
    rs.columns = response.at("columns").get<std::vector<std::string>>();
    append_rows(rs, response.at("rows"));
    if (response.contains("handle")) {
        std::string handle = response["handle"].get<std::string>();
        size_t pages = response.at("pages").get<size_t>();
        for (size_t p = 1; p < pages; ++p) {
            auto page = client.call_tool("frames/read", {{"handle", handle}, {"page", p}});
            append_rows(rs, page.at("rows"));
        }
        client.call_tool("frames/free", {{"handle", handle}});
    }
    return rs;
}

std::string ship_result_set(McpClient& client, const ResultSet& rs, int page_size) {
    size_t step = static_cast<size_t>(std::max(1, page_size));
    auto opened = client.call_tool("frames/open", {{"columns", rs.columns}});
    std::string handle = opened.at("handle").get<std::string>();
    for (size_t from = 0; from < rs.tuples.size(); from += step) {
        client.call_tool("frames/push",
                         {{"handle", handle}, {"rows", rows_to_json(rs.tuples, from, step)}});
    }
    return handle;
}

void VectorIndexRegistry::put(const std::string& dataset, FilteredVectorIndex index,
                              Modality modality) {
    std::unique_lock lock(mutex_);
    indexes_[dataset] = {std::make_shared<FilteredVectorIndex>(std::move(index)), modality};
}

std::shared_ptr<const FilteredVectorIndex> VectorIndexRegistry::get(
    const std::string& dataset) const {
    std::shared_lock lock(mutex_);
    auto it = indexes_.find(dataset);
    if (it == indexes_.end()) throw Error("unindexed dataset " + dataset);
    return it->second.first;
}

Modality VectorIndexRegistry::modality_of(const std::string& dataset) const {
    std::shared_lock lock(mutex_);
    auto it = indexes_.find(dataset);
    if (it == indexes_.end()) throw Error("unindexed dataset " + dataset);
    return it->second.second;
}

bool VectorIndexRegistry::has(const std::string& dataset) const {
    std::shared_lock lock(mutex_);
    return indexes_.count(dataset) > 0;
}

std::vector<std::string> VectorIndexRegistry::datasets() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [name, _] : indexes_) out.push_back(name);
    return out;
}

void VectorIndexRegistry::upsert(const std::string& dataset,
                                 const std::vector<VectorRecord>& records, Modality modality,
                                 const IndexParams& params) {
    if (records.empty()) return;
    std::unique_lock lock(mutex_);
    auto it = indexes_.find(dataset);
    std::shared_ptr<FilteredVectorIndex> next;
    if (it == indexes_.end()) {
        next = std::make_shared<FilteredVectorIndex>(
            static_cast<int>(records.front().embedding.size()), params);
    } else {
        next = std::make_shared<FilteredVectorIndex>(*it->second.first);  // clone
    }
    for (const auto& r : records) next->add(r);
    indexes_[dataset] = {next, modality};
}

void VectorIndexRegistry::augment(const std::string& dataset, const AttrCondition& condition) {
    std::unique_lock lock(mutex_);
    auto it = indexes_.find(dataset);
    if (it == indexes_.end()) throw Error("unindexed dataset " + dataset);
    auto next = std::make_shared<FilteredVectorIndex>(*it->second.first);
    next->augment(condition);
    it->second.first = next;
}

std::unique_ptr<McpServer> make_relational_server(const std::string& id,
                                                  std::shared_ptr<TableStore> tables,
                                                  std::shared_ptr<ScorerRegistry> scorers,
                                                  ServerOptions options) {
    auto server = std::make_unique<McpServer>(id);
    auto frames = std::make_shared<FrameStore>(options.page_size);
    add_frame_tools(*server, frames);
    McpServer* srv = server.get();

    for (const auto& name : tables->table_names()) {
        server->add_resource("lake://" + name, name);
    }

    server->add_tool(
        "rel.execute", {{"type", "object"}},
        [tables, frames, options](const nlohmann::json& args, RequestContext&) {
            inject_latency(options.injected_latency_us);
            QueryPlan fragment = plan_from_json(args.at("fragment"));
            ScanResolver resolver = [&](const std::string& dataset) -> ResultSet {
                if (dataset.rfind(kFramesPrefix, 0) == 0) {
                    return frames->take(dataset.substr(std::string(kFramesPrefix).size()));
                }
                return tables->scan(dataset);
            };
            ResultSet rs = rel_execute(fragment, resolver);
            return frames->emit(std::move(rs));
        });

    server->add_tool("rel.stats", {{"type", "object"}},
                     [tables](const nlohmann::json& args, RequestContext&) {
                         std::string table = args.at("table").get<std::string>();
                         return nlohmann::json{{"table", table},
                                               {"rows", tables->row_count(table)}};
                     });

    server->add_tool("rel.sample", {{"type", "object"}},
                     [tables, frames](const nlohmann::json& args, RequestContext&) {
                         std::string table = args.at("table").get<std::string>();
                         size_t k = args.value("k", size_t{32});
                         ResultSet rs = tables->scan(table);
                         if (rs.tuples.size() > k) rs.tuples.resize(k);
                         return frames->emit(std::move(rs));
                     });

    server->add_tool(
        "rel.insert", {{"type", "object"}},
        [tables, srv, options](const nlohmann::json& args, RequestContext& ctx) {
            std::string table_name = args.at("table").get<std::string>();
            Table schema = tables->snapshot(table_name);
            std::vector<std::vector<Value>> rows;
            for (const auto& row : args.at("rows")) {
                std::vector<Value> values;
                for (size_t i = 0; i < row.size(); ++i) {
                    if (i < schema.columns.size() &&
                        schema.columns[i].type == ColumnType::ItemRefType && row[i].is_string()) {
                        values.push_back(ItemRef{schema.columns[i].ref_dataset,
                                                 row[i].get<std::string>(),
                                                 schema.columns[i].ref_modality});
                    } else {
                        values.push_back(value_from_json(row[i]));
                    }
                }
                rows.push_back(std::move(values));
            }
            auto ids = tables->insert_rows(table_name, rows);
            if (options.persist_tables) tables->persist(table_name);

            nlohmann::json items = nlohmann::json::array();
            for (size_t r = 0; r < rows.size(); ++r) {
                std::string content;
                for (size_t c = 0; c < rows[r].size(); ++c) {
                    if (c) content += " ";
                    content += schema.columns[c].name + "=" + render_cell(rows[r][c]);
                }
                items.push_back({{"id", ids[r]}, {"content", content}});
            }
            srv->resource_updated("lake://" + table_name,
                                  {{"kind", "insert"}, {"ids", ids}, {"items", items}}, &ctx);
            return nlohmann::json{{"inserted", ids.size()}, {"ids", ids}};
        },
        /*exclusive=*/true);

    server->add_tool(
        "rel.delete", {{"type", "object"}},
        [tables, srv, options](const nlohmann::json& args, RequestContext& ctx) {
            std::string table_name = args.at("table").get<std::string>();
            auto ids = args.at("ids").get<std::vector<std::string>>();
            size_t deleted = tables->delete_rows(table_name, ids);
            if (options.persist_tables) tables->persist(table_name);
            srv->resource_updated("lake://" + table_name,
                                  {{"kind", "delete"}, {"ids", ids}}, &ctx);
            return nlohmann::json{{"deleted", deleted}};
        },
        /*exclusive=*/true);

    if (scorers) {
        server->add_tool(
            "scorer.fit", {{"type", "object"}},
            [scorers](const nlohmann::json& args, RequestContext&) {
                scorers->fit_sample(args.at("id").get<std::string>(),
                                    args.at("x").get<std::vector<double>>(),
                                    args.at("y").get<double>());
                return nlohmann::json{{"ok", true}, {"count", scorers->scorer().sample_count()}};
            },
            /*exclusive=*/true);
        server->add_tool(
            "scorer.unlearn", {{"type", "object"}},
            [scorers](const nlohmann::json& args, RequestContext&) {
                scorers->unlearn_sample(args.at("id").get<std::string>());
                return nlohmann::json{{"ok", true}, {"count", scorers->scorer().sample_count()}};
            },
            /*exclusive=*/true);
        server->add_tool("scorer.weights", {{"type", "object"}},
                         [scorers](const nlohmann::json&, RequestContext&) {
                             return nlohmann::json{{"weights", scorers->scorer().weights()}};
                         });
    }
    return server;
}

std::unique_ptr<McpServer> make_image_server(const std::string& id,
                                             std::shared_ptr<VisionProvider> provider,
                                             std::shared_ptr<ExtractionProvider> extractor,
                                             ServerOptions options) {
    auto server = std::make_unique<McpServer>(id);
    auto frames = std::make_shared<FrameStore>(options.page_size);
    add_frame_tools(*server, frames);

    auto collect_items = [frames](const nlohmann::json& args) {
        std::vector<ItemRef> items;
        if (args.contains("input_handle")) {
            ResultSet rs = frames->take(args["input_handle"].get<std::string>());
            for (const auto& t : rs.tuples) {
                if (t.cells.empty()) throw Error("empty item row");
                const auto* ref = std::get_if<ItemRef>(&t.cells[0].second);
                if (!ref) throw Error("item frame must carry item refs");
                items.push_back(*ref);
            }
        } else {
            for (const auto& j : args.at("items")) items.push_back(item_ref_from_json(j));
        }
        return items;
    };

    server->add_tool(
        "image.match", {{"type", "object"}},
        [provider, frames, options, collect_items](const nlohmann::json& args, RequestContext&) {
            std::string predicate = args.at("predicate").get<std::string>();
            auto items = collect_items(args);
            ResultSet rs;
            rs.columns = {"item", "verdict", "confidence"};
            for (const auto& item : items) {
                inject_latency(options.injected_latency_us);
                auto [verdict, confidence] = provider->classify(item, predicate);
                auto& row = rs.emplace_row();
                row.cells.emplace_back("item", Value{item});
                row.cells.emplace_back("verdict", Value{verdict});
                row.cells.emplace_back("confidence", Value{confidence});
            }
            return frames->emit(std::move(rs));
        });

    server->add_tool(
        "image.extract", {{"type", "object"}},
        [extractor, frames, options, collect_items](const nlohmann::json& args, RequestContext&) {
            if (!extractor) throw Error("no extraction provider configured");
            auto fields = args.at("fields").get<std::vector<std::string>>();
            auto items = collect_items(args);
            ResultSet rs;
            rs.columns = {"item"};
            for (const auto& f : fields) rs.columns.push_back(f);
            for (const auto& item : items) {
                inject_latency(options.injected_latency_us);
                auto& row = rs.emplace_row();
                row.cells.emplace_back("item", Value{item});
                for (const auto& f : fields) {
                    row.cells.emplace_back(f, extractor->extract(item, f));
                }
            }
            return frames->emit(std::move(rs));
        });

    return server;
}

namespace {

std::optional<AttrCondition> condition_from_args(const nlohmann::json& args) {
    if (!args.contains("filter") || args["filter"].is_null()) return std::nullopt;
    return AttrCondition::from_json(args["filter"]);
}

std::vector<float> query_embedding(const nlohmann::json& args, const EmbedderOptions& embedder) {
    const auto& q = args.at("query");
    if (q.is_string()) return embed_text(q.get<std::string>(), embedder);
    return q.get<std::vector<float>>();
}

nlohmann::json hits_to_rows(const std::vector<SearchHit>& hits, const std::string& dataset,
                            Modality modality, FrameStore& frames) {
    ResultSet rs;
    rs.columns = {"item", "score"};
    for (const auto& h : hits) {
        auto& row = rs.emplace_row();
        row.cells.emplace_back("item", Value{ItemRef{dataset, h.id, modality}});
        row.cells.emplace_back("score", Value{h.similarity});
    }
    return frames.emit(std::move(rs));
}

}  // namespace

std::unique_ptr<McpServer> make_vector_server(const std::string& id,
                                              std::shared_ptr<VectorIndexRegistry> registry,
                                              EmbedderOptions embedder, ServerOptions options) {
    auto server = std::make_unique<McpServer>(id);
    auto frames = std::make_shared<FrameStore>(options.page_size);
    add_frame_tools(*server, frames);
    McpServer* srv = server.get();

    server->add_tool(
        "vec.sem_match", {{"type", "object"}},
        [registry, frames, embedder, options](const nlohmann::json& args, RequestContext& ctx) {
            inject_latency(options.injected_latency_us);
            std::string dataset = args.at("dataset").get<std::string>();
            int k = args.at("k").get<int>();
            if (k < 1) throw Error("k must be >= 1");
            auto index = registry->get(dataset);
            Modality modality = registry->modality_of(dataset);
            auto condition = condition_from_args(args);

            if (!args.contains("loop")) {
                auto q = query_embedding(args, embedder);
                auto hits = index->search_filtered(q, k, condition ? &*condition : nullptr);
                return hits_to_rows(hits, dataset, modality, *frames);
            }

            // Iterative refinement around the retrieval, with the host as
            // the clarification peer.
            LoopConfig config;
            const auto& loop_args = args["loop"];
            config.budget = loop_args.value("budget", config.budget);
            config.confidence_threshold =
                loop_args.value("threshold", config.confidence_threshold);
            SubQuery sub;
            sub.text = args.at("query").get<std::string>();
            sub.terms = loop_args.value("terms", std::vector<std::string>{});
            if (sub.terms.empty()) sub.terms = tokenize(sub.text);
            sub.k = k;
            sub.threshold = loop_args.value("match_threshold", 0.0);

            LoopExecutor executor = [&](const SubQuery& q) {
                auto emb = embed_text(q.text, embedder);
                int fetch = q.k + 5;
                auto hits = index->search_filtered(emb, fetch, condition ? &*condition : nullptr);
                LoopResult result;
                for (size_t i = 0; i < hits.size(); ++i) {
                    ScoredItem item;
                    item.item = {dataset, hits[i].id, modality};
                    item.score = std::clamp((hits[i].similarity + 1.0) / 2.0, 0.0, 1.0);
                    if (auto idx = index->index_of(hits[i].id)) {
                        const auto& rec = index->record(*idx);
                        item.embedding = rec.embedding;
                        auto text_attr = rec.metadata.find("text");
                        if (text_attr != rec.metadata.end()) {
                            if (const auto* s = std::get_if<std::string>(&text_attr->second)) {
                                item.text = *s;
                            }
                        }
                    }
                    if (item.score < q.threshold) continue;
                    if (static_cast<int>(result.items.size()) < q.k) {
                        result.items.push_back(std::move(item));
                    } else {
                        result.overflow.push_back(std::move(item));
                    }
                }
                if (q.diversify) {
                    // drop items nearly identical to an earlier keeper
                    std::vector<ScoredItem> kept;
                    for (auto& it : result.items) {
                        bool dup = std::any_of(kept.begin(), kept.end(), [&](const ScoredItem& k2) {
                            return !it.embedding.empty() && !k2.embedding.empty() &&
                                   cosine_similarity(it.embedding, k2.embedding) > 0.99;
                        });
                        if (!dup) kept.push_back(std::move(it));
                    }
                    result.items = std::move(kept);
                }
                return result;
            };

            ClarificationChannel clarify = [&](const SubQuery& q, const EvidenceScore& score)
                -> std::optional<std::string> {
                if (!ctx.endpoint) return std::nullopt;
                try {
                    auto reply = ctx.endpoint->call(
                        "host/clarify",
                        {{"query", q.to_json()}, {"score", score.to_json()}}, 5000);
                    if (reply.contains("amended") && reply["amended"].is_string()) {
                        return reply["amended"].get<std::string>();
                    }
                } catch (const RpcError&) {
                    // host declined or cannot clarify; proceed unchanged
                }
                return std::nullopt;
            };

            auto outcome = run_loop(sub, executor, config, default_term_matcher(), clarify);
            std::vector<SearchHit> hits;
            for (const auto& item : outcome.best.items) {
                hits.push_back({item.item.item_id, item.score * 2.0 - 1.0});
            }
            nlohmann::json response = hits_to_rows(hits, dataset, modality, *frames);
            response["loop_trace"] = outcome.trace_json();
            return response;
        });

    server->add_tool(
        "vec.score_items", {{"type", "object"}},
        [registry, embedder, options](const nlohmann::json& args, RequestContext&) {
            inject_latency(options.injected_latency_us);
            std::string dataset = args.at("dataset").get<std::string>();
            auto index = registry->get(dataset);
            auto q = query_embedding(args, embedder);
            std::vector<float> qn = q;
            l2_normalize(qn);
            nlohmann::json scores = nlohmann::json::object();
            for (const auto& j : args.at("items")) {
                ItemRef ref = item_ref_from_json(j);
                auto idx = index->index_of(ref.item_id);
                if (!idx) throw Error("unknown vector item " + ref.item_id);
                scores[ref.item_id] =
                    cosine_similarity(qn, index->record(*idx).embedding);
            }
            return nlohmann::json{{"scores", scores}};
        });

    server->add_tool(
        "vec.upsert", {{"type", "object"}},
        [registry, srv, embedder](const nlohmann::json& args, RequestContext& ctx) {
            std::string dataset = args.at("dataset").get<std::string>();
            Modality modality =
                modality_from_string(args.value("modality", "vector")).value_or(Modality::Vector);
            IndexParams params;
            std::vector<VectorRecord> records;
            std::vector<std::string> ids;
            for (const auto& r : args.at("records")) {
                VectorRecord rec;
                rec.id = r.at("id").get<std::string>();
                if (r.contains("embedding")) {
                    rec.embedding = r["embedding"].get<std::vector<float>>();
                } else {
                    rec.embedding = embed_text(r.at("text").get<std::string>(), embedder);
                    rec.metadata["text"] = r["text"].get<std::string>();
                }
                nlohmann::json metadata = r.value("metadata", nlohmann::json::object());
                for (auto it = metadata.begin(); it != metadata.end(); ++it) {
                    rec.metadata[it.key()] = value_from_json(it.value());
                }
                ids.push_back(rec.id);
                records.push_back(std::move(rec));
            }
            bool fresh = !registry->has(dataset);
            registry->upsert(dataset, records, modality, params);
            if (fresh) srv->add_resource("lake://vectors/" + dataset, dataset);
            srv->resource_updated("lake://vectors/" + dataset,
                                  {{"kind", "insert"}, {"ids", ids}}, &ctx);
            return nlohmann::json{{"count", ids.size()}};
        },
        /*exclusive=*/true);

    server->add_tool(
        "vec.augment", {{"type", "object"}},
        [registry](const nlohmann::json& args, RequestContext&) {
            registry->augment(args.at("dataset").get<std::string>(),
                              AttrCondition::from_json(args.at("condition")));
            return nlohmann::json{{"ok", true}};
        },
        /*exclusive=*/true);

    return server;
}

}  // namespace taiji
