//! Running one external command with a hard timeout.

use std::fs::File;
use std::io;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Exited(i32),
    /// Killed by a signal we did not send.
    Signaled,
    TimedOut,
}

/// Runs `argv` in its own process group with stdout and stderr redirected to
/// files. On timeout the whole group is killed, so children spawned by shell
/// wrappers do not outlive the run.
pub(crate) fn run(
    argv: &[String],
    cwd: &Path,
    stdout: &Path,
    stderr: &Path,
    timeout: Duration,
) -> io::Result<(Outcome, Duration)> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty command"))?;
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(File::create(stdout)?)
        .stderr(File::create(stderr)?)
        .process_group(0)
        .spawn()?;
    let outcome = match child.wait_timeout(timeout)? {
        Some(status) => match status.code() {
            Some(code) => Outcome::Exited(code),
            None => Outcome::Signaled,
        },
        None => {
            // The child leads its own group, so its pid is the group id.
            unsafe {
                libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
            }
            child.wait()?;
            Outcome::TimedOut
        }
    };
    Ok((outcome, start.elapsed()))
}
