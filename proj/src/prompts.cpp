#include "loom/prompts.hpp"

namespace loom {

std::string role_name(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "system";
}

namespace {

std::set<std::string> scan_placeholders(const std::string& text) {
    std::set<std::string> names;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                i += 2;
                continue;
            }
            size_t close = text.find('}', i + 1);
            if (close == std::string::npos) break;
            names.insert(text.substr(i + 1, close - i - 1));
            i = close + 1;
            continue;
        }
        ++i;
    }
    return names;
}

std::string substitute(const std::string& text,
                       const std::map<std::string, std::string>& variables) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                out.push_back('{');
                i += 2;
                continue;
            }
            size_t close = text.find('}', i + 1);
            if (close == std::string::npos) {
                out.push_back(c);
                ++i;
                continue;
            }
            std::string name = text.substr(i + 1, close - i - 1);
            auto it = variables.find(name);
            if (it == variables.end()) {
                throw MissingVariableError(name);
            }
            out += it->second;
            i = close + 1;
            continue;
        }
        if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            i += 2;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

} // namespace

std::vector<Message> PromptTemplate::render(
    const std::map<std::string, std::string>& variables) const {
    std::vector<Message> rendered;
    rendered.reserve(messages.size());
    for (const auto& msg : messages) {
        rendered.push_back({msg.role, substitute(msg.content, variables)});
    }
    return rendered;
}

void PromptLibrary::add(PromptTemplate tmpl) {
    for (const auto& msg : tmpl.messages) {
        auto names = scan_placeholders(msg.content);
        tmpl.placeholders.insert(names.begin(), names.end());
    }
    templates_[tmpl.id] = std::move(tmpl);
}

const PromptTemplate& PromptLibrary::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) {
        throw Error("unknown prompt template: " + id);
    }
    return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

namespace {

const char* kPlannerSystem = R"(Given a user question and a database schema, analyze the question to identify and break it down into relevant sub-questions.

Determine which tools (e.g., {tool_names}) are appropriate for answering each sub-question based on the available database information and tools.

Decompose the user question into sub-questions that capture all elements of the question's intent. This includes identifying the main objective, relevant sub-questions, necessary background information, assumptions, and any secondary requirements.

Ensure that no part of the original question's intent is omitted, and create a list of individual steps to answer the question fully and accurately using tools.

You may need to use one tool multiple times to answer the original question.

First, you should begin by thoroughly analyzing the user's main question. It's important to understand the key components and objectives within the query.

Next, you must review the provided database schema. This involves examining the tables, fields, and relationships within the database to identify which parts of the schema are relevant to the user's question and contribute to a set of sub-questions.

For each sub-question, provide all the required information that may required in other tasks. In order to find this information look at the user question and the database information.

Each sub-question or step should focus exclusively on a single task.

Each sub-question should be a textual question. Don't generate a code as a sub-question.

Create a plan to solve it with the utmost parallelizability.

Each plan should comprise an action from the following {num_tools} types:

{tool_descriptions}
{num_tools}. join(): Collects and combines results from prior actions.

 - An LLM agent is called upon invoking join() to either finalize the user query or wait until the plans are executed.

 - join should always be the last action in the plan, and will be called in two scenarios:

   (a) if the answer can be determined by gathering the outputs from tasks to generate the final response.

   (b) if the answer cannot be determined in the planning phase before you execute the plans.

Guidelines:

 - Each action described above contains input/output types and descriptions.

 - You must strictly adhere to the input and output types for each action.

 - The action descriptions contain the guidelines. You MUST strictly follow those guidelines when you use the actions.

 - Each action in the plan should strictly be one of the above types. Follow the Python conventions for each action.

 - Each action MUST have a unique ID, which is strictly increasing.

 - Inputs for actions can either be constants or outputs from preceding actions. In the latter case, use the format $id to denote the ID of the previous action whose output will be the input.

 - If there is an input from preceding actions, always point its id as `$id` in the context of the action

 - Always call join as the last action in the plan. Say '<END_OF_PLAN>' after you call join.

 - Ensure the plan maximizes parallelizability.

 - Only use the provided action types. If a query cannot be addressed using these, invoke the join action for the next steps.

 - Never introduce new actions other than the ones provided.

{business_rules})";

const char* kPlannerClosing =
    R"(Remember, ONLY respond with the task list in the correct format! E.g.: idx. tool(arg_name=args),)";

const char* kDecisionSystem = R"(Solve a question answering task. Here are some guidelines:

- In the Assistant Scratchpad, you will be given results of a plan you have executed to answer the user's question.

- Thought needs to reason about the question based on the Observations in 1-2 sentences.

- Ignore irrelevant action results.

- If the required information is present, give a concise but complete and helpful answer to the user's question.

- If you are unable to give a satisfactory finishing answer, replan to get the required information. Respond in the following format:

Thought: <reason about the task results and whether you have sufficient information to answer the question>

Action: <action to take>

- If an error occurs during previous actions, replan and take corrective measures to obtain the required information.

- Ensure that you consider errors in all the previous steps, and try to replan accordingly.

- Ensure the final answer is provided in a structured format as JSON as follows:

    {{'Summary': <concise summary of the answer>,

     'details': <detailed explanation and supporting information>,

     'source': <source of the information or how it was obtained>,

     'inference':<your final inference as YES, No, or list of requested information without any extra information which you can take from the `labels` as given below>,
     'extra explanation':<put here the extra information that you don't provide in inference >,

     }}

     In the `inference` do not provide additional explanation or description. Put them in `extra explanation`.

Available actions:

(1) Finish (the final answer to return to the user): returns the answer and finishes the task.

(2) Replan(the reasoning and other information that will help you plan again. Can be a line of any length): instructs why we must replan.)";

const char* kDecisionClosing = R"(Using the above previous actions, decide whether to replan or finish.

    If all the required information is present, you may finish. Consider replanning for data_preparation task if you want to structure the response in a proper way.

    If you have made many attempts to find the information without success, admit so and respond with whatever information you have gathered so the user can work well with you.

    Do not generate a response based on the sample data (assumption). If you failed after multiple attempts, you can finish and explain the reason.)";

const char* kText2SqlSystem = R"(You are a database expert. Generate a SQL query given the following user question, database information and other context that you receive.
You should analyse the question, context and database schema and come up with the executable sqlite3 query.

Provide all the required information in the SQL code to answer the original user question that may required in other tasks utilizing the relevant database schema.

Ensure you include all necessary information, including columns used for filtering, especially when the task involves plotting or data exploration.

This must be taken into account when performing any time-based data queries or analyses.

Translate a text question into a SQL query that can be executed on the SQLite database.

You should stick to the available schema including tables and columns in the database and should not bring any new tables or columns.)";

const char* kTextAnalysisSystem = R"(You are a text analysis assistant.
Analyze the provided question and report to answer the question.

Only answer the question and don't provide extra information in your answer.

In your answer, be concrete and use None if you can't find the answer in the report.

The output should be in the format: {{'reasoning': '...', 'answer': '...'}})";

const char* kDataPreparationSystem = R"(You are a data preparation and processing assistant. Create a proper structure for the provided data from the previous steps to answer the request.

- If the required information has not found in the provided data, ask for replanning and ask from previous tools to include the missing information.

- You should include all the input data in the code, and prevent of ignoring them by `# ... (rest of the data)`.

- You should provide a name or caption for each value in the final output considering the question and the input context.

- Don't create any sample data in order to answer to the user question.

- You should print the final data structure.

- You should save the final data structure at the specified path with a proper filename.

- You should output the final data structure as a final output.)";

const char* kDataPlottingSystem = R"(You are a data plotting assistant. Plot the provided data from the previous steps to answer the question.

- Analyze the user's request and input data to determine the most suitable type of visualization/plot that also can be understood by the simple user.

- If the required information has not been found in the provided data, ask for replanning and ask from previous tools to include the missing information.

- Don't create any sample data in order to answer to the user question.

- You should save the generated plot at the specified path with the proper filename and .png extension.)";

const char* kIntentTablesSystem = R"(You are a database expert. Given a user question and the database schema, select the tables that are relevant to answering the question.

Respond with a JSON array of table names chosen only from the provided schema. Do not add any other text.)";

} // namespace

PromptLibrary PromptLibrary::builtin() {
    PromptLibrary lib;

    PromptTemplate planner;
    planner.id = "planner";
    planner.messages = {{Role::System, kPlannerSystem},
                        {Role::User, "{state}"},
                        {Role::System, kPlannerClosing}};
    lib.add(planner);

    // The replanner shares the planner's template; only the state it is
    // rendered with differs (prior plan, completed results, failures).
    PromptTemplate replanner = planner;
    replanner.id = "replanner";
    lib.add(replanner);

    PromptTemplate decision;
    decision.id = "decision";
    decision.messages = {{Role::System, kDecisionSystem},
                         {Role::User, "{state}"},
                         {Role::System, kDecisionClosing}};
    lib.add(decision);

    PromptTemplate text2sql;
    text2sql.id = "text2sql";
    text2sql.messages = {{Role::System, kText2SqlSystem},
                         {Role::User, "{task_description}, {db_schema}"}};
    lib.add(text2sql);

    PromptTemplate text_analysis;
    text_analysis.id = "text_analysis";
    text_analysis.messages = {{Role::System, kTextAnalysisSystem},
                              {Role::User, "{task_description}, {document}"}};
    lib.add(text_analysis);

    PromptTemplate data_preparation;
    data_preparation.id = "data_preparation";
    data_preparation.messages = {{Role::System, kDataPreparationSystem},
                                 {Role::User, "{task_description}, {inputs}"}};
    lib.add(data_preparation);

    PromptTemplate data_plotting;
    data_plotting.id = "data_plotting";
    data_plotting.messages = {{Role::System, kDataPlottingSystem},
                              {Role::User, "{task_description}, {data}"}};
    lib.add(data_plotting);

    PromptTemplate intent_tables;
    intent_tables.id = "intent_tables";
    intent_tables.messages = {{Role::System, kIntentTablesSystem},
                              {Role::User, "{task_description}, {db_schema}"}};
    lib.add(intent_tables);

    return lib;
}

} // namespace loom
