//! External detector adapter.
//!
//! The detector is any program that takes an image path as its last argument
//! and prints one detection JSON document on stdout.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::formats::parse_detection_json;
use crate::wbf::DetectionSet;

/// Overrides the configured detector command when set.
pub const DETECTOR_ENV: &str = "GLAREFUSE_DETECTOR_CMD";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCommand {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl DetectorCommand {
    /// Splits a shell-style command line into program and arguments.
    pub fn parse(command_line: &str, timeout: Duration) -> Result<Self> {
        let mut words = shlex::split(command_line)
            .ok_or_else(|| Error::Config(format!("cannot parse detector command {command_line:?}")))?;
        if words.is_empty() {
            return Err(Error::Config("empty detector command".into()));
        }
        let program = words.remove(0);
        Ok(Self {
            program,
            args: words,
            timeout,
        })
    }

    /// Uses `GLAREFUSE_DETECTOR_CMD` if present, else `fallback`.
    pub fn from_env_or(fallback: Option<&str>, timeout: Duration) -> Result<Self> {
        match std::env::var(DETECTOR_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => Self::parse(&cmd, timeout),
            _ => match fallback {
                Some(cmd) => Self::parse(cmd, timeout),
                None => Err(Error::Config(format!(
                    "no detector command given and {DETECTOR_ENV} is unset"
                ))),
            },
        }
    }

    /// Runs the detector on one image.
    pub fn detect(&self, image_path: &Path) -> Result<DetectionSet> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .arg(image_path)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(Error::DetectorSpawn)?;

        // drain both pipes so a chatty detector cannot block on a full buffer
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let mut stderr = child.stderr.take().expect("stderr is piped");
        let out_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        let err_reader = std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stderr.read_to_string(&mut buf);
            buf
        });

        let status = match child.wait_timeout(self.timeout).map_err(Error::DetectorSpawn)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::DetectorTimeout(self.timeout.as_secs_f64()));
            }
        };
        let out = out_reader
            .join()
            .expect("stdout reader panicked")
            .map_err(|e| Error::DetectorOutput(format!("unreadable stdout: {e}")))?;
        let err = err_reader.join().expect("stderr reader panicked");

        if !status.success() {
            let tail: String = err.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
            return Err(Error::DetectorExit {
                code: status.code(),
                stderr: tail,
            });
        }
        parse_detection_json(&out).map_err(Error::DetectorOutput)
    }
}
