//! `#` header lines that make every output file self-describing.

/// Resolved invocation: the canonical command line plus named parameters.
///
/// The worker-thread count is deliberately absent so that outputs are
/// byte-identical whatever `--threads` was.
#[derive(Debug, Clone)]
pub struct RunManifest {
    command: Vec<String>,
    params: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        Self {
            command: vec!["hwdetect".into(), subcommand.into()],
            params: Vec::new(),
        }
    }

    /// Records a flag both in the reproducible command line and as a
    /// parameter line.
    pub fn flag(mut self, name: &str, value: impl ToString) -> Self {
        let value = value.to_string();
        self.command.push(format!("--{name}"));
        self.command.push(value.clone());
        self.params.push((name.into(), value));
        self
    }

    pub fn switch(mut self, name: &str) -> Self {
        self.command.push(format!("--{name}"));
        self.params.push((name.into(), "true".into()));
        self
    }

    /// Adds an informational line that is not a flag.
    pub fn note(mut self, name: &str, value: impl ToString) -> Self {
        self.params.push((name.into(), value.to_string()));
        self
    }

    /// Header lines without the leading `# `.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("hwdetect {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command.join(" ")),
        ];
        out.extend(self.params.iter().map(|(k, v)| format!("{k}: {v}")));
        out
    }

    pub fn header(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}
