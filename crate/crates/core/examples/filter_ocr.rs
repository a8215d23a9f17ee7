//! Confidence and watermark filtering of on-screen text spans.

use shortscribe::extraction::{default_watermarks, filter_ocr, MIN_OCR_CONFIDENCE};
use shortscribe::OcrSpan;

fn main() {
    let spans: Vec<OcrSpan> = [
        ("3 cups quinoa", 0.98),
        ("street sign", 0.80),
        ("TikTok", 0.99),
        ("@nourished.by.mads", 0.99),
        ("exactly at the line", 0.95),
        ("just under", 0.9499),
    ]
    .into_iter()
    .map(|(text, confidence)| OcrSpan {
        text: text.into(),
        confidence,
        shot_number: 1,
    })
    .collect();
    let kept = filter_ocr(&spans, MIN_OCR_CONFIDENCE, &default_watermarks());
    for s in &spans {
        let verdict = if kept.contains(s) { "keep" } else { "drop" };
        println!("{verdict}  {:.4}  {}", s.confidence, s.text);
    }
}
