package demo;

import java.io.IOException;
import java.io.Writer;

public class DataStore {
    void store(Writer out, String data) throws IOException {
        out.write(data);
        out.close();
    }
}
