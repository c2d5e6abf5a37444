//! External predictor process speaking the NDJSON protocol over stdio.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{parse_child_line, ChildMessage, HostMessage, PredictRequest};
use super::{
    check_batch_shape, EmotionVector, FramesSpec, MidLevelVector, Prediction, Predictor, PredictorCapabilities,
    PredictorError, EMOTION_COUNT, MID_COUNT, PROTOCOL_VERSION,
};
use crate::audio::Spectrogram;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalOptions {
    /// Per-message response timeout.
    pub timeout: Duration,
    /// Maximum spectrograms per predict request.
    pub batch_size: usize,
    /// Maximum requests in flight.
    pub window: usize,
}

impl Default for ExternalOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(30), batch_size: 16, window: 4 }
    }
}

/// Owns the child process. Movable between threads; callers on several
/// threads must serialize access themselves.
pub struct ExternalPredictor {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    capabilities: PredictorCapabilities,
    options: ExternalOptions,
    next_id: u64,
}

impl std::fmt::Debug for ExternalPredictor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalPredictor")
            .field("command", &self.command)
            .field("options", &self.options)
            .finish_non_exhaustive()
    }
}

impl ExternalPredictor {
    /// Spawns `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, options: ExternalOptions) -> Result<Self, PredictorError> {
        if options.batch_size == 0 || options.window == 0 {
            return Err(PredictorError::Transport("batch_size and window must be positive".into()));
        }
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| PredictorError::Spawn { command: command.to_string(), source })?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        let stderr = child.stderr.take().expect("piped stderr");
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::info!(target: "midlime::predictor", "[child] {line}");
            }
        });

        let stdin = child.stdin.take();
        let mut this = Self {
            command: command.to_string(),
            child,
            stdin,
            lines,
            capabilities: PredictorCapabilities {
                mid_names: Vec::new(),
                emotion_names: Vec::new(),
                linear_head: None,
                input_spec: None,
            },
            options,
            next_id: 0,
        };
        this.handshake()?;
        Ok(this)
    }

    fn handshake(&mut self) -> Result<(), PredictorError> {
        let msg =
            serde_json::to_string(&HostMessage::Handshake { protocol: PROTOCOL_VERSION }).expect("static message");
        self.send_line(&msg)?;
        let line = self.recv_line()?;
        match parse_child_line(&line)? {
            ChildMessage::Capabilities(caps) => {
                self.capabilities = caps.into_capabilities()?;
                log::debug!(
                    "predictor `{}` ready (linear head: {})",
                    self.command,
                    self.capabilities.linear_head.is_some()
                );
                Ok(())
            }
            ChildMessage::Error { message } if message.contains("protocol") => {
                Err(PredictorError::ProtocolVersion { expected: PROTOCOL_VERSION, actual: 0 })
            }
            ChildMessage::Error { message } => {
                Err(PredictorError::Transport(format!("predictor refused handshake: {message}")))
            }
            ChildMessage::Prediction(_) => {
                Err(PredictorError::Protocol { reason: "expected capabilities".into(), line })
            }
        }
    }

    fn send_line(&mut self, line: &str) -> Result<(), PredictorError> {
        let stdin = self.stdin.as_mut().ok_or_else(|| PredictorError::Transport("predictor stdin closed".into()))?;
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .map_err(|e| PredictorError::Transport(format!("write to predictor failed: {e}{}", self.exit_note())))
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!(" (predictor exited: {status})"),
            _ => String::new(),
        }
    }

    fn recv_line(&mut self) -> Result<String, PredictorError> {
        loop {
            match self.lines.recv_timeout(self.options.timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(PredictorError::Transport(format!("reading predictor output failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => return Err(PredictorError::Timeout(self.options.timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    // give the child a moment to be reaped so the status is reported
                    let deadline = Instant::now() + Duration::from_millis(200);
                    let mut note = self.exit_note();
                    while note.is_empty() && Instant::now() < deadline {
                        thread::sleep(Duration::from_millis(10));
                        note = self.exit_note();
                    }
                    return Err(PredictorError::Transport(format!("predictor closed its output{note}")));
                }
            }
        }
    }

    fn check_input(&self, batch: &[Spectrogram]) -> Result<(), PredictorError> {
        check_batch_shape(batch)?;
        if let (Some(spec), Some(first)) = (self.capabilities.input_spec, batch.first()) {
            let (bins, frames) = first.shape();
            let frames_ok = match spec.frames {
                FramesSpec::Variable => true,
                FramesSpec::Fixed(f) => f == frames,
            };
            let bins_ok = spec.bins.is_none_or(|b| b == bins);
            if !bins_ok || !frames_ok {
                let expected_frames = match spec.frames {
                    FramesSpec::Fixed(f) => f,
                    FramesSpec::Variable => frames,
                };
                return Err(PredictorError::BatchShape {
                    index: 0,
                    expected: (spec.bins.unwrap_or(bins), expected_frames),
                    actual: (bins, frames),
                });
            }
        }
        Ok(())
    }

    /// Sends a clean shutdown and waits for the child to exit with status 0.
    pub fn shutdown(mut self) -> Result<(), PredictorError> {
        self.shutdown_inner()
    }

    fn shutdown_inner(&mut self) -> Result<(), PredictorError> {
        if self.stdin.is_some() {
            let msg = serde_json::to_string(&HostMessage::Shutdown).expect("static message");
            let _ = self.send_line(&msg);
            self.stdin = None;
        }
        let deadline = Instant::now() + self.options.timeout.min(Duration::from_secs(5));
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => {
                    return Err(PredictorError::Transport(format!("predictor exited with {status} after shutdown")))
                }
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                Ok(None) => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return Err(PredictorError::Timeout(self.options.timeout));
                }
                Err(e) => return Err(PredictorError::Transport(e.to_string())),
            }
        }
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Err(e) = self.shutdown_inner() {
            log::debug!("predictor shutdown: {e}");
        }
    }
}

fn collect_row<const N: usize>(row: &[Option<f64>], index: usize, field: &str) -> Result<[f64; N], PredictorError> {
    if row.len() != N {
        return Err(PredictorError::Arity { field: format!("{field}[{index}]"), expected: N, actual: row.len() });
    }
    let mut out = [0.0; N];
    for (k, (o, v)) in out.iter_mut().zip(row).enumerate() {
        match v {
            Some(x) if x.is_finite() => *o = *x,
            _ => return Err(PredictorError::PredictionValue { index, detail: format!("{field}[{k}] is not finite") }),
        }
    }
    Ok(out)
}

impl Predictor for ExternalPredictor {
    fn capabilities(&self) -> &PredictorCapabilities {
        &self.capabilities
    }

    fn predict(&mut self, batch: &[Spectrogram]) -> Result<Vec<Prediction>, PredictorError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        self.check_input(batch)?;
        let shape = batch[0].shape();
        let flat: Vec<std::borrow::Cow<'_, [f64]>> = batch
            .iter()
            .map(|s| match s.values.as_slice() {
                Some(slice) => std::borrow::Cow::Borrowed(slice),
                None => std::borrow::Cow::Owned(s.values.iter().copied().collect()),
            })
            .collect();

        let chunks: Vec<(usize, usize)> = (0..batch.len())
            .step_by(self.options.batch_size)
            .map(|start| (start, (start + self.options.batch_size).min(batch.len())))
            .collect();
        let mut results: Vec<Option<Prediction>> = vec![None; batch.len()];
        let mut pending: HashMap<u64, (usize, usize)> = HashMap::new();
        let mut next_chunk = 0;

        while next_chunk < chunks.len() || !pending.is_empty() {
            while next_chunk < chunks.len() && pending.len() < self.options.window {
                let (start, end) = chunks[next_chunk];
                let id = self.next_id;
                self.next_id += 1;
                let request = PredictRequest {
                    kind: "predict",
                    id,
                    shape: [shape.0, shape.1],
                    scale: "db",
                    batch: flat[start..end].iter().map(|c| c.as_ref()).collect(),
                };
                let line = serde_json::to_string(&request)
                    .map_err(|e| PredictorError::Transport(format!("serialize request: {e}")))?;
                self.send_line(&line)?;
                pending.insert(id, (start, end));
                next_chunk += 1;
            }

            let line = self.recv_line()?;
            let response = match parse_child_line(&line)? {
                ChildMessage::Prediction(p) => p,
                ChildMessage::Error { message } => {
                    return Err(PredictorError::Transport(format!("predictor reported an error: {message}")))
                }
                ChildMessage::Capabilities(_) => {
                    return Err(PredictorError::Protocol { reason: "unexpected capabilities message".into(), line })
                }
            };
            let Some((start, end)) = pending.remove(&response.id) else {
                return Err(PredictorError::Protocol {
                    reason: format!("response id {} matches no outstanding request", response.id),
                    line,
                });
            };
            let n = end - start;
            if response.mid.len() != n || response.emotion.len() != n {
                return Err(PredictorError::Transport(format!(
                    "response {} has {} mid / {} emotion rows for {n} items",
                    response.id,
                    response.mid.len(),
                    response.emotion.len()
                )));
            }
            for k in 0..n {
                let index = start + k;
                let mid = collect_row::<MID_COUNT>(&response.mid[k], index, "mid")?;
                let emotion = collect_row::<EMOTION_COUNT>(&response.emotion[k], index, "emotion")?;
                results[index] = Some(Prediction { mid: MidLevelVector(mid), emotion: EmotionVector(emotion) });
            }
        }

        results
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| PredictorError::Transport(format!("no prediction for item {i}"))))
            .collect()
    }
}
