package demo;

import java.io.IOException;
import java.io.Writer;

public class ReportWriter {
    void save(Writer out, String header, String body) throws IOException {
        out.write(header);
        out.write(body);
        out.close();
    }
}
