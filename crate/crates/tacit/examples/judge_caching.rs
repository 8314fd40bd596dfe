//! Judge client plumbing: content-addressed caching, malformed-response
//! retries, and verdict parsing.
//!
//! Run with: cargo run --example judge_caching -p tacit

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use tacit::judge::{
    JudgeClient, JudgeRequest, PresentationOrder, Provider, ResponseCache, TemplateId,
};

/// Pretend provider: first reply is undecorated prose, then a clean verdict.
struct FlakyProvider {
    calls: AtomicUsize,
}

impl Provider for FlakyProvider {
    fn complete(&self, _request: &JudgeRequest) -> tacit::Result<String> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(if call == 0 {
            "Happy to help! Paper 2 looks stronger to me overall.".to_string()
        } else {
            "After re-reading: <label>1</label> <confidence>7</confidence>".to_string()
        })
    }
}

fn main() -> tacit::Result<()> {
    let cache_dir = tempfile::tempdir()?;
    let provider = Arc::new(FlakyProvider {
        calls: AtomicUsize::new(0),
    });
    let client = JudgeClient::new(provider.clone())
        .with_cache(ResponseCache::open(cache_dir.path())?)
        .with_backoff_base(std::time::Duration::from_millis(1));

    let request = JudgeRequest {
        template_id: TemplateId::Evaluate,
        rendered_prompt: "judge this pair".to_string(),
        model_id: "demo-model".to_string(),
        temperature: 0.0,
        fold_nonce: 0,
        presentation_order: PresentationOrder::HighFirst,
    };

    let response = client.submit(&request)?;
    println!(
        "first submit: label {:?}, confidence {:?} after {} provider call(s)",
        response.label,
        response.confidence,
        provider.calls.load(Ordering::SeqCst)
    );

    let cached = client.submit(&request)?;
    println!(
        "second submit: label {:?} with still {} provider call(s) - served from cache",
        cached.label,
        provider.calls.load(Ordering::SeqCst)
    );

    let mut other_fold = request.clone();
    other_fold.fold_nonce = 1;
    client.submit(&other_fold)?;
    println!(
        "different fold nonce: {} provider call(s) - a distinct cache key",
        provider.calls.load(Ordering::SeqCst)
    );
    Ok(())
}
