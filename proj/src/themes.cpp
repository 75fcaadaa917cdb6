#include "arena/forge.hpp"

// The built-in theme templates. Each theme declares its collections (foreign
// key targets first), a toolset written in the tool language, mutation
// metadata for the write-bearing tools, and a description bank. Tool returns
// deliberately expose renamed id fields ("paper_id", "hotel_id", ...) that are
// absent from every schema, which is what gives the tool graph its strong
// edges; full-document returns expose schema field names and create weak ones.

namespace arena {

namespace {

std::vector<Value> words(std::initializer_list<const char*> xs) {
  std::vector<Value> out;
  for (const char* s : xs) out.emplace_back(std::string(s));
  return out;
}

FieldGen choice_of(std::initializer_list<const char*> xs) {
  FieldGen g;
  g.kind = "choice";
  g.choices = words(xs);
  return g;
}

FieldGen int_between(std::int64_t lo, std::int64_t hi) {
  FieldGen g;
  g.kind = "int_range";
  g.lo = lo;
  g.hi = hi;
  return g;
}

FieldGen float_between(double flo, double fhi, int decimals) {
  FieldGen g;
  g.kind = "float_range";
  g.flo = flo;
  g.fhi = fhi;
  g.decimals = decimals;
  return g;
}

FieldGen word_pair_of(std::initializer_list<const char*> xs) {
  FieldGen g;
  g.kind = "word_pair";
  g.choices = words(xs);
  return g;
}

FieldGen bool_with(double p) {
  FieldGen g;
  g.kind = "bool_p";
  g.p = p;
  return g;
}

FieldGen fk_into(const std::string& coll) {
  FieldGen g;
  g.kind = "fk";
  g.fk_collection = coll;
  return g;
}

FieldGen list_from(std::int64_t lo, std::int64_t hi, std::initializer_list<const char*> xs) {
  FieldGen g;
  g.kind = "list_choice";
  g.lo = lo;
  g.hi = hi;
  g.choices = words(xs);
  return g;
}

FieldGen const_of(Value v) {
  FieldGen g;
  g.kind = "const";
  g.const_value = std::move(v);
  return g;
}

FieldSpec field(const std::string& name, Kind kind, FieldGen gen, bool required = true) {
  FieldSpec f;
  f.name = name;
  f.kind = kind;
  f.required = required;
  f.gen = std::move(gen);
  return f;
}

CollectionSpec collection(const std::string& name, const std::string& id_prefix,
                          std::int64_t min_docs, std::int64_t max_docs,
                          std::vector<FieldSpec> fields) {
  CollectionSpec c;
  c.name = name;
  c.id_prefix = id_prefix;
  c.min_docs = min_docs;
  c.max_docs = max_docs;
  c.fields = std::move(fields);
  return c;
}

ArgSampler sample_doc_id(const std::string& coll) {
  ArgSampler s;
  s.kind = "doc_id";
  s.collection = coll;
  return s;
}

ArgSampler sample_choice(std::initializer_list<const char*> xs) {
  ArgSampler s;
  s.kind = "choice";
  s.choices = words(xs);
  return s;
}

ArgSampler sample_values(std::vector<Value> xs) {
  ArgSampler s;
  s.kind = "choice";
  s.choices = std::move(xs);
  return s;
}

ToolSpec tool(const std::string& source, const std::string& intent,
              const std::string& pronoun_intent, std::map<std::string, ArgSampler> samplers) {
  ToolSpec t;
  t.source = source;
  t.samplers = std::move(samplers);
  t.intent = intent;
  t.pronoun_intent = pronoun_intent;
  return t;
}

MutationSpec mutation(const std::string& tool_name, const std::string& coll,
                      const std::string& id_param, std::map<std::string, Value> sets) {
  MutationSpec m;
  m.tool = tool_name;
  m.collection = coll;
  m.id_param = id_param;
  m.sets = std::move(sets);
  return m;
}

std::vector<double> one_hot(std::size_t index, std::size_t n = 6) {
  std::vector<double> v(n, 0.0);
  v[index] = 1.0;
  return v;
}

const std::vector<std::string> kConnectors = {"Then", "After that", "Next", "Once that's done"};

// ---------------------------------------------------------------------------

ThemeTemplate make_arxiv() {
  ThemeTemplate t;
  t.theme = "arxiv";
  t.feature_vector = one_hot(0);

  t.collections = {
      collection("authors", "a", 5, 8,
                 {field("name", Kind::String,
                        choice_of({"ada lovelace", "edsger dijkstra", "grace hopper",
                                   "alan turing", "barbara liskov", "donald knuth",
                                   "radia perlman", "john mccarthy"})),
                  field("affiliation", Kind::String,
                        choice_of({"mit", "stanford", "cmu", "oxford", "eth zurich", "berkeley"})),
                  field("h_index", Kind::Int, int_between(5, 80))}),
      collection("papers", "p", 10, 16,
                 {field("title", Kind::String,
                        word_pair_of({"sparse", "neural", "quantum", "robust", "deep", "latent",
                                      "causal", "convex", "spectral", "bayesian"})),
                  field("author_ref", Kind::String, fk_into("authors")),
                  field("year", Kind::Int, int_between(2015, 2026)),
                  field("topic", Kind::String,
                        choice_of({"learning", "systems", "theory", "robotics"})),
                  field("citations", Kind::Int, int_between(0, 400)),
                  field("flagged", Kind::Bool, const_of(Value(false))),
                  field("tags", Kind::List,
                        list_from(1, 3, {"benchmark", "survey", "dataset", "code", "award"}))}),
  };

  auto topic = sample_choice({"learning", "systems", "theory", "robotics"});
  auto paper = sample_doc_id("papers");

  t.tools = {
      tool(R"(tool find_paper(topic: string) -> object reads [papers] {
  let hits = filter(db.papers, p, p.topic == topic)
  assert len(hits) > 0, "nothing published on that topic"
  let best = first(sort_by(hits, p, -p.citations))
  return {"paper_id": best.id, "title": best.title, "citations": best.citations}
})",
           "track down the most cited publication about {topic}",
           "track down the most cited publication on that subject", {{"topic", topic}}),
      tool(R"(tool get_paper(paper_id: string) -> object reads [papers] {
  let hits = filter(db.papers, p, p.id == paper_id)
  assert len(hits) > 0, "unknown entry"
  return first(hits)
})",
           "pull up the full record for entry {paper_id}", "pull up its full record",
           {{"paper_id", paper}}),
      tool(R"(tool author_of(paper_id: string) -> object reads [authors, papers] {
  let ps = filter(db.papers, p, p.id == paper_id)
  assert len(ps) > 0, "unknown entry"
  let ref = first(ps).author_ref
  let hits = filter(db.authors, a, a.id == ref)
  assert len(hits) > 0, "dangling reference"
  let who = first(hits)
  return {"author_id": who.id, "name": who.name, "affiliation": who.affiliation}
})",
           "figure out who wrote entry {paper_id}", "figure out who wrote it",
           {{"paper_id", paper}}),
      tool(R"(tool avg_citations(topic: string) -> float reads [papers] {
  let hits = filter(db.papers, p, p.topic == topic)
  assert len(hits) > 0, "nothing published on that topic"
  return avg(map(hits, p, p.citations))
})",
           "compute the average citation count across {topic} publications",
           "compute the average citation count for that subject", {{"topic", topic}}),
      tool(R"(tool count_papers(topic: string) -> int reads [papers] {
  return count(db.papers, p, p.topic == topic)
})",
           "count how many publications cover {topic}",
           "count how many publications cover that subject", {{"topic", topic}}),
      tool(R"(tool flag_paper(paper_id: string) -> object reads [papers] writes [papers] {
  let hits = filter(db.papers, p, p.id == paper_id)
  assert len(hits) > 0, "unknown entry"
  update(papers, p, p.id == paper_id, {"flagged": true})
  return {"paper_id": paper_id, "flagged": true}
})",
           "mark entry {paper_id} for editorial review", "mark it for editorial review",
           {{"paper_id", paper}}),
  };

  t.mutations = {mutation("flag_paper", "papers", "paper_id", {{"flagged", Value(true)}})};

  t.bank.openers = {"I'm doing a literature sweep.", "My reading list needs attention.",
                    "I'm prepping a related-work section."};
  t.bank.vague_openers = {"Something in my research notes needs sorting out.",
                          "Handle a small scholarly chore for me."};
  t.bank.connectors = kConnectors;
  return t;
}

// ---------------------------------------------------------------------------

ThemeTemplate make_emails() {
  ThemeTemplate t;
  t.theme = "emails";
  t.feature_vector = one_hot(1);

  t.collections = {
      collection("contacts", "c", 5, 8,
                 {field("name", Kind::String,
                        choice_of({"pat silva", "noor rahman", "lena fischer", "omar diaz",
                                   "yuki tanaka", "ivan petrov", "mary okafor", "finn berg"})),
                  field("address", Kind::String,
                        choice_of({"pat@zephyr.example", "noor@vale.example", "lena@mesa.example",
                                   "omar@reef.example", "yuki@dune.example", "ivan@onyx.example",
                                   "mary@ember.example", "finn@fjord.example"})),
                  field("active", Kind::Bool, bool_with(0.8))}),
      collection("messages", "m", 10, 16,
                 {field("sender_ref", Kind::String, fk_into("contacts")),
                  field("subject", Kind::String,
                        word_pair_of({"quarterly", "urgent", "draft", "travel", "invoice",
                                      "meeting", "budget", "holiday", "renewal", "final"})),
                  field("folder", Kind::String, choice_of({"inbox", "archive", "spam"})),
                  field("unread", Kind::Bool, bool_with(0.5)),
                  field("size_kb", Kind::Int, int_between(1, 900))}),
  };

  auto contact = sample_doc_id("contacts");
  auto message = sample_doc_id("messages");

  t.tools = {
      tool(R"(tool find_contact(name: string) -> object reads [contacts] {
  let hits = filter(db.contacts, c, c.name == name)
  assert len(hits) > 0, "nobody by that name"
  let who = first(hits)
  return {"contact_id": who.id, "address": who.address}
})",
           "look up the address book entry for {name}", "look up their address book entry",
           {{"name",
             sample_choice({"pat silva", "noor rahman", "lena fischer", "omar diaz", "yuki tanaka",
                            "ivan petrov", "mary okafor", "finn berg"})}}),
      tool(R"(tool biggest_from(contact_id: string) -> object reads [messages] {
  let ms = filter(db.messages, m, m.sender_ref == contact_id)
  assert len(ms) > 0, "no mail from them"
  let top = first(sort_by(ms, m, -m.size_kb))
  return {"message_id": top.id, "subject": top.subject, "size_kb": top.size_kb}
})",
           "find the bulkiest piece of mail sent by {contact_id}",
           "find the bulkiest piece of mail they sent", {{"contact_id", contact}}),
      tool(R"(tool read_message(message_id: string) -> object reads [messages] {
  let hits = filter(db.messages, m, m.id == message_id)
  assert len(hits) > 0, "no such mail item"
  return first(hits)
})",
           "open mail item {message_id}", "open it", {{"message_id", message}}),
      tool(R"(tool archive_message(message_id: string) -> object reads [messages] writes [messages] {
  let hits = filter(db.messages, m, m.id == message_id)
  assert len(hits) > 0, "no such mail item"
  update(messages, m, m.id == message_id, {"folder": "archive"})
  return {"message_id": message_id, "folder": "archive"}
})",
           "file mail item {message_id} away under archive", "file it away under archive",
           {{"message_id", message}}),
      tool(R"(tool count_unread() -> int reads [messages] {
  return count(db.messages, m, m.unread)
})",
           "tally how many mail items are still unread",
           "tally how many mail items are still unread", {}),
      tool(R"(tool folder_size(folder: string) -> int reads [messages] {
  return sum(map(filter(db.messages, m, m.folder == folder), m, m.size_kb))
})",
           "add up the total size of everything filed under {folder}",
           "add up the total size of everything filed there",
           {{"folder", sample_choice({"inbox", "archive", "spam"})}}),
  };

  t.mutations = {
      mutation("archive_message", "messages", "message_id", {{"folder", Value("archive")}})};

  t.bank.openers = {"My inbox got away from me.", "I'm cleaning up my mail.",
                    "Time to triage my mail."};
  t.bank.vague_openers = {"Deal with a loose end in my correspondence.",
                          "Something in my mail needs attention."};
  t.bank.connectors = kConnectors;
  return t;
}

// ---------------------------------------------------------------------------

ThemeTemplate make_calendar() {
  ThemeTemplate t;
  t.theme = "calendar";
  t.feature_vector = one_hot(2);

  auto day_pool = {"2026-09-01", "2026-09-03", "2026-09-08", "2026-09-12",
                   "2026-09-15", "2026-09-21", "2026-09-26", "2026-10-02"};

  t.collections = {
      collection("users", "u", 5, 7,
                 {field("name", Kind::String,
                        choice_of({"avery chen", "sam novak", "ida brooks", "leo costa",
                                   "zara malik", "theo lund", "nina rossi"})),
                  field("city", Kind::String,
                        choice_of({"lisbon", "oslo", "kyoto", "quito"}))}),
      collection("events", "e", 10, 16,
                 {field("title", Kind::String,
                        word_pair_of({"planning", "standup", "design", "budget", "launch",
                                      "retro", "onboarding", "strategy", "review", "sync"})),
                  field("day", Kind::String, choice_of(day_pool)),
                  field("organizer_ref", Kind::String, fk_into("users")),
                  field("attendees", Kind::Int, int_between(2, 40)),
                  field("cancelled", Kind::Bool, bool_with(0.1))}),
      collection("holidays", "h", 3, 5,
                 {field("name", Kind::String,
                        choice_of({"harvest festival", "founders day", "midsummer break",
                                   "lantern night", "solstice fair"})),
                  field("day", Kind::String, choice_of(day_pool))}),
  };

  auto user = sample_doc_id("users");
  auto event = sample_doc_id("events");
  auto day = sample_choice(day_pool);

  t.tools = {
      tool(R"(tool find_user(name: string) -> object reads [users] {
  let hits = filter(db.users, u, u.name == name)
  assert len(hits) > 0, "nobody by that name"
  let who = first(hits)
  return {"user_id": who.id, "city": who.city}
})",
           "look up the person named {name}", "look up that person",
           {{"name",
             sample_choice({"avery chen", "sam novak", "ida brooks", "leo costa", "zara malik",
                            "theo lund", "nina rossi"})}}),
      tool(R"(tool next_event(user_id: string) -> object reads [events] {
  let ev = filter(db.events, e, e.organizer_ref == user_id && e.cancelled == false)
  assert len(ev) > 0, "nothing on their schedule"
  let nxt = first(sort_by(ev, e, e.day))
  return {"event_id": nxt.id, "title": nxt.title, "day": nxt.day}
})",
           "find the earliest upcoming gathering organized by {user_id}",
           "find the earliest upcoming gathering they organize", {{"user_id", user}}),
      tool(R"(tool event_details(event_id: string) -> object reads [events] {
  let hits = filter(db.events, e, e.id == event_id)
  assert len(hits) > 0, "no such gathering"
  return first(hits)
})",
           "pull the details for gathering {event_id}", "pull up its details",
           {{"event_id", event}}),
      tool(R"(tool cancel_event(event_id: string) -> object reads [events] writes [events] {
  let hits = filter(db.events, e, e.id == event_id)
  assert len(hits) > 0, "no such gathering"
  update(events, e, e.id == event_id, {"cancelled": true})
  return {"event_id": event_id, "cancelled": true}
})",
           "call off gathering {event_id}", "call it off", {{"event_id", event}}),
      tool(R"(tool count_events_on(day: string, include_cancelled?: bool) -> int reads [events] {
  if include_cancelled == true {
    return count(db.events, e, e.day == day)
  }
  return count(db.events, e, e.day == day && e.cancelled == false)
})",
           "count the gatherings scheduled on {day}", "count the gatherings scheduled that day",
           {{"day", day},
            {"include_cancelled", sample_values({Value(true), Value(false)})}}),
      tool(R"(tool is_holiday(day: string) -> bool reads [holidays] {
  return count(db.holidays, h, h.day == day) > 0
})",
           "check whether {day} is a day off", "check whether that day is a day off",
           {{"day", day}}),
      tool(R"(tool avg_attendees(user_id: string) -> float reads [events] {
  let ev = filter(db.events, e, e.organizer_ref == user_id)
  assert len(ev) > 0, "nothing on their schedule"
  return avg(map(ev, e, e.attendees))
})",
           "work out the average headcount for gatherings run by {user_id}",
           "work out the average headcount for gatherings they run", {{"user_id", user}}),
  };

  t.mutations = {mutation("cancel_event", "events", "event_id", {{"cancelled", Value(true)}})};

  t.bank.openers = {"I'm sorting out my week.", "My schedule needs a pass.",
                    "Help me plan the next few days."};
  t.bank.vague_openers = {"A scheduling matter needs attention.",
                          "Handle a small planning chore for me."};
  t.bank.connectors = kConnectors;
  return t;
}

// ---------------------------------------------------------------------------

ThemeTemplate make_hotels() {
  ThemeTemplate t;
  t.theme = "hotels";
  t.feature_vector = one_hot(3);

  t.collections = {
      collection("hotels", "h", 8, 12,
                 {field("name", Kind::String,
                        word_pair_of({"grand", "royal", "harbor", "cedar", "summit", "garden",
                                      "crescent", "amber"})),
                  field("city", Kind::String, choice_of({"lisbon", "oslo", "kyoto", "quito"})),
                  field("stars", Kind::Int, int_between(1, 5)),
                  field("price", Kind::Float, float_between(40.0, 400.0, 2)),
                  field("open", Kind::Bool, bool_with(0.85))}),
      collection("bookings", "b", 8, 14,
                 {field("hotel_ref", Kind::String, fk_into("hotels")),
                  field("guest", Kind::String,
                        choice_of({"pat silva", "noor rahman", "lena fischer", "omar diaz",
                                   "yuki tanaka", "ivan petrov"})),
                  field("nights", Kind::Int, int_between(1, 14))}),
  };

  auto hotel = sample_doc_id("hotels");
  auto city = sample_choice({"lisbon", "oslo", "kyoto", "quito"});

  t.tools = {
      tool(R"(tool find_hotel(city: string) -> object reads [hotels] {
  let hs = filter(db.hotels, h, h.city == city && h.open)
  assert len(hs) > 0, "nowhere to stay there"
  let cheapest = first(sort_by(hs, h, h.price))
  return {"hotel_id": cheapest.id, "name": cheapest.name, "price": cheapest.price}
})",
           "find the cheapest open place to stay in {city}",
           "find the cheapest open place to stay there", {{"city", city}}),
      tool(R"(tool hotel_details(hotel_id: string) -> object reads [hotels] {
  let hits = filter(db.hotels, h, h.id == hotel_id)
  assert len(hits) > 0, "no such property"
  return first(hits)
})",
           "show everything on file about property {hotel_id}", "show everything on file about it",
           {{"hotel_id", hotel}}),
      tool(R"(tool avg_price(city: string) -> float reads [hotels] {
  let hs = filter(db.hotels, h, h.city == city)
  assert len(hs) > 0, "no listings there"
  return avg(map(hs, h, h.price))
})",
           "compute the average nightly price in {city}", "compute the average nightly price there",
           {{"city", city}}),
      tool(R"(tool count_bookings(hotel_id: string) -> int reads [bookings] {
  return count(db.bookings, b, b.hotel_ref == hotel_id)
})",
           "count the reservations held at property {hotel_id}",
           "count the reservations held there", {{"hotel_id", hotel}}),
      tool(R"(tool longest_stay(hotel_id: string) -> object reads [bookings] {
  let bs = filter(db.bookings, b, b.hotel_ref == hotel_id)
  assert len(bs) > 0, "no reservations for it"
  let top = first(sort_by(bs, b, -b.nights))
  return {"booking_id": top.id, "guest": top.guest, "nights": top.nights}
})",
           "find the longest reservation at property {hotel_id}", "find its longest reservation",
           {{"hotel_id", hotel}}),
      tool(R"(tool close_hotel(hotel_id: string) -> object reads [hotels] writes [hotels] {
  let hits = filter(db.hotels, h, h.id == hotel_id)
  assert len(hits) > 0, "no such property"
  update(hotels, h, h.id == hotel_id, {"open": false})
  return {"hotel_id": hotel_id, "open": false}
})",
           "take property {hotel_id} off the market", "take it off the market",
           {{"hotel_id", hotel}}),
  };

  t.mutations = {mutation("close_hotel", "hotels", "hotel_id", {{"open", Value(false)}})};

  t.bank.openers = {"I'm planning a trip.", "I'm comparing places for an upcoming stay.",
                    "Travel planning time."};
  t.bank.vague_openers = {"A travel detail needs sorting out.",
                          "Handle a lodging question for me."};
  t.bank.connectors = kConnectors;
  return t;
}

// ---------------------------------------------------------------------------

ThemeTemplate make_appstore() {
  ThemeTemplate t;
  t.theme = "appstore";
  t.feature_vector = one_hot(4);

  t.collections = {
      collection("apps", "a", 8, 12,
                 {field("name", Kind::String,
                        word_pair_of({"pixel", "swift", "cloud", "echo", "nova", "turbo", "zen",
                                      "atlas"})),
                  field("category", Kind::String,
                        choice_of({"games", "finance", "health", "travel"})),
                  field("rating", Kind::Float, float_between(1.0, 5.0, 1)),
                  field("downloads", Kind::Int, int_between(100, 99999)),
                  field("price", Kind::Float, float_between(0.0, 9.99, 2)),
                  field("featured", Kind::Bool, bool_with(0.15))}),
      collection("reviews", "r", 8, 14,
                 {field("app_ref", Kind::String, fk_into("apps")),
                  field("stars", Kind::Int, int_between(1, 5)),
                  field("helpful", Kind::Int, int_between(0, 500))}),
  };

  auto app = sample_doc_id("apps");
  auto category = sample_choice({"games", "finance", "health", "travel"});

  t.tools = {
      tool(R"(tool find_app(category: string) -> object reads [apps] {
  let hits = filter(db.apps, a, a.category == category)
  assert len(hits) > 0, "nothing in that category"
  let top = first(sort_by(hits, a, -a.downloads))
  return {"app_id": top.id, "name": top.name, "rating": top.rating}
})",
           "find the most downloaded {category} title",
           "find the most downloaded title in that category", {{"category", category}}),
      tool(R"(tool app_details(app_id: string) -> object reads [apps] {
  let hits = filter(db.apps, a, a.id == app_id)
  assert len(hits) > 0, "no such title"
  return first(hits)
})",
           "open the store page for title {app_id}", "open its store page", {{"app_id", app}}),
      tool(R"(tool avg_rating(category: string) -> float reads [apps] {
  let hits = filter(db.apps, a, a.category == category)
  assert len(hits) > 0, "nothing in that category"
  return avg(map(hits, a, a.rating))
})",
           "compute the average score across {category} titles",
           "compute the average score across that category", {{"category", category}}),
      tool(R"(tool review_summary(app_id: string) -> object reads [reviews] {
  let rs = filter(db.reviews, r, r.app_ref == app_id)
  assert len(rs) > 0, "no feedback yet"
  return {"app_id": app_id, "review_count": len(rs), "avg_stars": avg(map(rs, r, r.stars))}
})",
           "summarize the feedback left on title {app_id}", "summarize the feedback left on it",
           {{"app_id", app}}),
      tool(R"(tool feature_app(app_id: string) -> object reads [apps] writes [apps] {
  let hits = filter(db.apps, a, a.id == app_id)
  assert len(hits) > 0, "no such title"
  update(apps, a, a.id == app_id, {"featured": true})
  return {"app_id": app_id, "featured": true}
})",
           "promote title {app_id} to the featured shelf", "promote it to the featured shelf",
           {{"app_id", app}}),
      tool(R"(tool count_apps(category: string) -> int reads [apps] {
  return count(db.apps, a, a.category == category)
})",
           "count the titles filed under {category}", "count the titles filed under that category",
           {{"category", category}}),
  };

  t.mutations = {mutation("feature_app", "apps", "app_id", {{"featured", Value(true)}})};

  t.bank.openers = {"I'm curating my device.", "I'm researching the store catalog.",
                    "App hunting again."};
  t.bank.vague_openers = {"A storefront matter needs attention.",
                          "Sort out a catalog question for me."};
  t.bank.connectors = kConnectors;
  return t;
}

// ---------------------------------------------------------------------------

ThemeTemplate make_fooddelivery() {
  ThemeTemplate t;
  t.theme = "fooddelivery";
  t.feature_vector = one_hot(5);

  t.collections = {
      collection("restaurants", "r", 8, 12,
                 {field("name", Kind::String,
                        word_pair_of({"golden", "lucky", "spice", "corner", "river", "old", "blue",
                                      "iron"})),
                  field("city", Kind::String, choice_of({"austin", "seoul", "milan", "lagos"})),
                  field("cuisine", Kind::String, choice_of({"ramen", "tacos", "curry", "pizza"})),
                  field("rating", Kind::Float, float_between(1.0, 5.0, 1)),
                  field("open", Kind::Bool, bool_with(0.8))}),
      collection("orders", "o", 10, 16,
                 {field("restaurant_ref", Kind::String, fk_into("restaurants")),
                  field("item", Kind::String,
                        choice_of({"noodle bowl", "family platter", "veggie wrap",
                                   "spicy special"})),
                  field("price", Kind::Float, float_between(5.0, 60.0, 2)),
                  field("status", Kind::String, choice_of({"placed", "cooking", "delivered"}))}),
  };

  auto restaurant = sample_doc_id("restaurants");

  t.tools = {
      tool(R"(tool find_restaurant(cuisine: string) -> object reads [restaurants] {
  let hits = filter(db.restaurants, r, r.cuisine == cuisine && r.open)
  assert len(hits) > 0, "nothing open serving that"
  let top = first(sort_by(hits, r, -r.rating))
  return {"restaurant_id": top.id, "name": top.name, "rating": top.rating}
})",
           "pick the best rated open kitchen serving {cuisine}",
           "pick the best rated open kitchen serving that cuisine",
           {{"cuisine", sample_choice({"ramen", "tacos", "curry", "pizza"})}}),
      tool(R"(tool restaurant_details(restaurant_id: string) -> object reads [restaurants] {
  let hits = filter(db.restaurants, r, r.id == restaurant_id)
  assert len(hits) > 0, "no such kitchen"
  return first(hits)
})",
           "bring up the profile for kitchen {restaurant_id}", "bring up its profile",
           {{"restaurant_id", restaurant}}),
      tool(R"(tool order_volume(restaurant_id: string) -> object reads [orders] {
  let os = filter(db.orders, o, o.restaurant_ref == restaurant_id)
  assert len(os) > 0, "no deliveries from it"
  return {"restaurant_id": restaurant_id, "order_count": len(os), "revenue": sum(map(os, o, o.price))}
})",
           "total up the deliveries booked from kitchen {restaurant_id}",
           "total up the deliveries booked from it", {{"restaurant_id", restaurant}}),
      tool(R"(tool avg_order_price(status: string) -> float reads [orders] {
  let os = filter(db.orders, o, o.status == status)
  assert len(os) > 0, "nothing with that status"
  return avg(map(os, o, o.price))
})",
           "compute the average ticket for deliveries marked {status}",
           "compute the average ticket for deliveries with that status",
           {{"status", sample_choice({"placed", "cooking", "delivered"})}}),
      tool(R"(tool close_restaurant(restaurant_id: string) -> object reads [restaurants] writes [restaurants] {
  let hits = filter(db.restaurants, r, r.id == restaurant_id)
  assert len(hits) > 0, "no such kitchen"
  update(restaurants, r, r.id == restaurant_id, {"open": false})
  return {"restaurant_id": restaurant_id, "open": false}
})",
           "shut kitchen {restaurant_id} down for the day", "shut it down for the day",
           {{"restaurant_id", restaurant}}),
      tool(R"(tool count_open(city: string) -> int reads [restaurants] {
  return count(db.restaurants, r, r.city == city && r.open)
})",
           "count the kitchens still open in {city}", "count the kitchens still open there",
           {{"city", sample_choice({"austin", "seoul", "milan", "lagos"})}}),
  };

  t.mutations = {
      mutation("close_restaurant", "restaurants", "restaurant_id", {{"open", Value(false)}})};

  t.bank.openers = {"I'm getting dinner organized.", "Time to sort out tonight's food.",
                    "I'm reviewing the delivery scene."};
  t.bank.vague_openers = {"A food errand needs doing.", "Handle a delivery question for me."};
  t.bank.connectors = kConnectors;
  return t;
}

}  // namespace

const std::vector<ThemeTemplate>& builtin_themes() {
  static const std::vector<ThemeTemplate> themes = {make_arxiv(),  make_emails(),
                                                    make_calendar(), make_hotels(),
                                                    make_appstore(), make_fooddelivery()};
  return themes;
}

}  // namespace arena
