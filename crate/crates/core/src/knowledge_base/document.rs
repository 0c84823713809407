/// Renders a column as `[Name]: <name>; [Type]: <type>; [Desc]: <comment>`.
///
/// A `;` inside any value is written as `\;` and a backslash as `\\`, so
/// [`parse_column_document`] can always split the three parts back out.
pub fn render_column_document(name: &str, data_type: &str, description: Option<&str>) -> String {
    format!("[Name]: {}; [Type]: {}; [Desc]: {}", escape(name), escape(data_type), escape(description.unwrap_or("")))
}

/// Inverse of [`render_column_document`]: `(name, type, description)`.
pub fn parse_column_document(text: &str) -> Option<(String, String, String)> {
    let parts = split_unescaped(text);
    let [name, ty, desc] = parts.as_slice() else { return None };
    Some((
        name.strip_prefix("[Name]: ")?.to_string(),
        ty.strip_prefix(" [Type]: ")?.to_string(),
        desc.strip_prefix(" [Desc]: ")?.to_string(),
    ))
}

fn escape(value: &str) -> String {
    value.replace('\\', "\\\\").replace(';', "\\;")
}

/// Splits on unescaped `;`, unescaping as it goes.
fn split_unescaped(text: &str) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(next) = chars.next() {
                    parts.last_mut().expect("non-empty").push(next);
                }
            }
            ';' => parts.push(String::new()),
            _ => parts.last_mut().expect("non-empty").push(c),
        }
    }
    parts
}
