//! Chat-completion client and the prompt-driven policy built on it.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_action, Policy, PolicyContext, PolicyError, PolicyFactory};
use crate::craftworld::{render_text, Action, Observation};
use crate::evaluator::AP_INSTRUCTION;

pub const EXPLORE_PROMPT: &str = include_str!("../../data/prompts/explore.txt");
pub const RELABEL_PROMPT: &str = include_str!("../../data/prompts/relabel.txt");
pub const EVALUATE_PROMPT: &str = include_str!("../../data/prompts/evaluate.txt");
pub const FEEDBACK_PROMPT: &str = include_str!("../../data/prompts/feedback.txt");

pub const API_KEY_ENV: &str = "SKILLFORGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Explore,
    Relabel,
    Evaluate,
    Feedback,
}

impl TemplateId {
    pub fn text(self) -> &'static str {
        match self {
            TemplateId::Explore => EXPLORE_PROMPT,
            TemplateId::Relabel => RELABEL_PROMPT,
            TemplateId::Evaluate => EVALUATE_PROMPT,
            TemplateId::Feedback => FEEDBACK_PROMPT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Extra attempts after the first failed request.
    pub retry_budget: u32,
    pub template: TemplateId,
    pub max_in_flight: usize,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub api_key_env: String,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "gpt-4o".into(),
            temperature: 1.0,
            max_tokens: 64,
            retry_budget: 3,
            template: TemplateId::Explore,
            max_in_flight: 8,
            backoff_ms: 500,
            timeout_secs: 60,
            api_key_env: API_KEY_ENV.into(),
        }
    }
}

impl LlmEndpointConfig {
    /// Evaluation defaults: greedy decoding with the evaluation template.
    pub fn for_evaluation(mut self) -> Self {
        self.temperature = 0.0;
        self.template = TemplateId::Evaluate;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    messages: &'a [ChatMessage],
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChatMessage,
}

/// Counting semaphore limiting concurrent requests.
#[derive(Debug, Default)]
struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn acquire(&self, cap: usize) -> Permit<'_> {
        let mut busy = self.busy.lock().expect("gate lock");
        while *busy >= cap.max(1) {
            busy = self.freed.wait(busy).expect("gate lock");
        }
        *busy += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().expect("gate lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Blocking chat client; clones share the in-flight cap.
#[derive(Clone)]
pub struct ChatClient {
    cfg: LlmEndpointConfig,
    agent: ureq::Agent,
    gate: Arc<Gate>,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(cfg: LlmEndpointConfig) -> Self {
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        Self { cfg, agent, gate: Arc::new(Gate::default()), api_key }
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.cfg
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    /// Sends one chat request, retrying transport errors, 429 and 5xx with exponential backoff.
    pub fn complete(&self, messages: &[ChatMessage]) -> Result<String, PolicyError> {
        let body = ChatRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
            messages,
        };
        let attempts = self.cfg.retry_budget + 1;
        let mut last_status = None;
        let mut last_message = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            let _permit = self.gate.acquire(self.cfg.max_in_flight);
            let mut req = self.agent.post(&self.url());
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    last_status = Some(status);
                    if status == 200 {
                        match resp.body_mut().read_json::<ChatResponse>() {
                            Ok(parsed) => {
                                return parsed.choices.into_iter().next().map(|c| c.message.content).ok_or_else(|| {
                                    PolicyError::Transport {
                                        attempts: attempt + 1,
                                        status: Some(status),
                                        message: "response has no choices".into(),
                                    }
                                });
                            }
                            Err(e) => last_message = format!("malformed response body: {e}"),
                        }
                    } else {
                        last_message = resp.body_mut().read_to_string().unwrap_or_default();
                        if status != 429 && status < 500 {
                            return Err(PolicyError::Transport {
                                attempts: attempt + 1,
                                status: Some(status),
                                message: last_message,
                            });
                        }
                    }
                }
                Err(e) => last_message = e.to_string(),
            }
            tracing::debug!(attempt, status = ?last_status, "chat request failed");
        }
        Err(PolicyError::Transport { attempts, status: last_status, message: last_message })
    }
}

/// User message carrying the history and the current observation.
pub fn render_turn(ctx: &PolicyContext, obs_text: &str) -> String {
    let mut out = String::new();
    for (text, action) in &ctx.history {
        out.push_str(text);
        out.push_str("\nAction: ");
        out.push_str(action.name());
        out.push_str("\n\n");
    }
    out.push_str(obs_text);
    out.push_str("\nAction:");
    out
}

pub fn render_system(template: TemplateId, ctx: &PolicyContext) -> String {
    let text = template.text();
    match template {
        TemplateId::Explore => {
            let feedback = match &ctx.feedback {
                Some(f) => format!("- {}", f.next_iteration_advice),
                None => format!("- {AP_INSTRUCTION}"),
            };
            text.replace("{feedback}", &feedback)
        }
        TemplateId::Evaluate => text.replace("{task}", ctx.goal.as_deref().unwrap_or(AP_INSTRUCTION)),
        _ => text.to_string(),
    }
}

pub struct LlmPolicy {
    client: ChatClient,
    pub parse_failures: u32,
}

impl LlmPolicy {
    pub fn new(client: ChatClient) -> Self {
        Self { client, parse_failures: 0 }
    }
}

impl Policy for LlmPolicy {
    fn decide(&mut self, ctx: &PolicyContext, obs: &Observation) -> Result<Action, PolicyError> {
        let messages = [
            ChatMessage::system(render_system(self.client.cfg.template, ctx)),
            ChatMessage::user(render_turn(ctx, &render_text(obs))),
        ];
        let reply = self.client.complete(&messages)?;
        match parse_action(&reply) {
            Ok(a) => Ok(a),
            Err(e) => {
                self.parse_failures += 1;
                tracing::warn!(reply = %e.text, "unparseable action reply, using noop");
                Ok(Action::Noop)
            }
        }
    }
}

impl PolicyFactory for ChatClient {
    fn id(&self) -> String {
        format!("llm({}, {:?})", self.cfg.model, self.cfg.template)
    }

    fn make(&self) -> Box<dyn Policy> {
        Box::new(LlmPolicy::new(self.clone()))
    }
}

#[cfg(test)]
pub(crate) mod mock {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex};

    /// Minimal HTTP server replying with scripted (status, body) pairs, one per connection.
    /// Returns the base URL and the captured request bodies.
    pub fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for (status, body) in replies {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let mut stream = stream;
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(resp.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1"), seen)
    }

    pub fn reply(content: &str) -> String {
        serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(base_url: String, retry_budget: u32) -> LlmEndpointConfig {
        LlmEndpointConfig { base_url, retry_budget, backoff_ms: 1, ..Default::default() }
    }

    #[test]
    fn retries_server_errors_then_parses_reply() {
        let (url, seen) = mock::serve(vec![(500, "boom".into()), (200, mock::reply("Action: move_up"))]);
        let mut policy = LlmPolicy::new(ChatClient::new(config(url, 2)));
        let obs = crate::craftworld::observe(&crate::craftworld::new_world(42, &Default::default()).unwrap());
        assert_eq!(policy.decide(&PolicyContext::default(), &obs).unwrap(), Action::MoveUp);
        let bodies = seen.lock().unwrap();
        assert_eq!(bodies.len(), 2);
        let req: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
        assert_eq!(req["model"], "gpt-4o");
        assert_eq!(req["messages"][0]["role"], "system");
        assert!(req["messages"][1]["content"].as_str().unwrap().contains("health: 9/9"));
    }

    #[test]
    fn exhausted_budget_reports_last_status() {
        let (url, _) = mock::serve(vec![(503, "a".into()), (503, "b".into())]);
        let client = ChatClient::new(config(url, 1));
        match client.complete(&[ChatMessage::user("hi")]) {
            Err(PolicyError::Transport { attempts, status, .. }) => {
                assert_eq!(attempts, 2);
                assert_eq!(status, Some(503));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unparseable_reply_falls_back_to_noop() {
        let (url, _) = mock::serve(vec![(200, mock::reply("I am not sure"))]);
        let mut policy = LlmPolicy::new(ChatClient::new(config(url, 0)));
        let obs = crate::craftworld::observe(&crate::craftworld::new_world(1, &Default::default()).unwrap());
        assert_eq!(policy.decide(&PolicyContext::default(), &obs).unwrap(), Action::Noop);
        assert_eq!(policy.parse_failures, 1);
    }

    #[test]
    fn explore_prompt_carries_feedback_verbatim() {
        let fb = crate::feedback::Feedback::for_test(vec![]);
        let ctx = PolicyContext::default().with_feedback(Some(fb));
        let sys = render_system(TemplateId::Explore, &ctx);
        assert!(sys.ends_with("### Feedback from Previous Round\n- Focus on testing.\n"));
        let eval = render_system(TemplateId::Evaluate, &PolicyContext::default().with_goal(Some("Collect iron".into())));
        assert!(eval.contains("Task : Collect iron"));
    }
}
